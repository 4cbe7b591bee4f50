#pragma once

#include <map>
#include <string>
#include <vector>

#include "resp/models.hpp"
#include "resp/synth.hpp"
#include "resp/trainer.hpp"

namespace resp::cli {

// Flat key=value run configuration. Only keys in the registry are accepted;
// values the caller never set fall back to registry defaults. Every command
// writes the fully resolved document next to its outputs, and re-running from
// that document alone reproduces the outputs bit-identically.
class RunConfig {
public:
    static const std::map<std::string, std::string>& registry();  // key -> default

    void set(const std::string& key, const std::string& value);
    bool is_set(const std::string& key) const { return overrides_.count(key) > 0; }

    std::string get_string(const std::string& key) const;
    long long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;

    // parse "key = value" lines ('#' comments, blank lines allowed)
    void merge_file(const std::string& path);
    static RunConfig from_file(const std::string& path);

    // sorted key=value rendering of every effective value
    std::string resolved_text() const;

    // typed views
    synth::SynthConfig synth_config() const;
    // starts from variant defaults and materializes the learning-rate keys so
    // the resolved document pins them
    train::TrainConfig train_config(models::Variant variant);
    train::ModelSpecs model_specs(models::Variant variant, int n_t) const;
    models::ClassifierSpec classifier_spec(int n_t) const;
    models::ReconNetSpec recon_spec() const;

private:
    std::map<std::string, std::string> overrides_;
};

}  // namespace resp::cli
