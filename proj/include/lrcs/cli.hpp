#pragma once

// Command-line front end. Exit codes: 0 success, 1 validation or I/O error,
// 2 numerical failure.
//
//   lrcs-cdti [--config FILE] [--threads N] [--seed S] [--log-level L] <command> ...
//
//   phantom CONFIG.json -o DIR     ground truth, fully sampled k-space, labels.json
//   sample  --kspace DIR --labels FILE --R R [--scheme S] -o DIR
//   recon   --kspace DIR --coils DIR --mask DIR --labels FILE [--method M --phase P ...] -o DIR
//   fit     --series DIR --roi DIR -o DIR
//   metrics --tensors DIR --roi DIR -o DIR
//   eval    --cells FILE -o DIR
//   run     PLAN.json [-o DIR]
//
// --config takes a JSON object whose keys are long option names; options of a
// subcommand live under an object named after it. The command line wins.

namespace lrcs::cli {

int main(int argc, char** argv);

}  // namespace lrcs::cli
