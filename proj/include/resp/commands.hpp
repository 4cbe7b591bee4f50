#pragma once

#include <string>

#include "resp/runconfig.hpp"

namespace resp::cli {

// Each command is a pure function of (inputs, resolved config): it creates the
// output directory, writes its artifacts plus the resolved config and a hash
// manifest, and throws resp::Error on failure. Paths of the main artifacts
// are returned for chaining.

struct CommandResult {
    std::string out_dir;
    std::string dataset_path;
    std::string bundle_path;
    std::string report_path;
};

CommandResult cmd_synth(RunConfig cfg);
CommandResult cmd_preprocess(RunConfig cfg, const std::string& marker_csv,
                             const std::string& thresholds_json = "");
CommandResult cmd_train(RunConfig cfg, const std::string& dataset_path);
CommandResult cmd_generate(RunConfig cfg, const std::string& bundle_path);
CommandResult cmd_classify(RunConfig cfg, const std::string& bundle_path,
                           const std::string& dataset_path);
CommandResult cmd_reconstruct(RunConfig cfg, const std::string& bundle_path,
                              const std::string& dataset_path);
CommandResult cmd_eval(RunConfig cfg, const std::string& bundle_path,
                       const std::string& dataset_path);
CommandResult cmd_repro(RunConfig cfg, const std::string& experiment);  // s1 | s2 | recon

}  // namespace resp::cli
