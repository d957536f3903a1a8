#pragma once

#include "pngnn/cgnn/engine.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pngnn::suite {

struct SuiteOptions {
    std::uint64_t seed = 0;
    bool inverse_augmentation = false;
    // Empty runs sum, mean and max.
    std::vector<cgnn::Aggregator> aggregators;
    std::size_t draws = 50;        // random parameter draws per aggregator
    std::size_t fuzz_trials = 200; // random (graph, formula) pairs
};

// Keys: seed, inverse, aggregator ("all" or a name), draws, fuzz_trials.
SuiteOptions suite_options_from_json(const nlohmann::json& j);

enum class Status { kPass, kFail, kSkipped };
const char* status_name(Status s);

struct CheckResult {
    std::string name;
    Status status = Status::kPass;
    std::string detail;
    nlohmann::ordered_json data;
};

struct SuiteReport {
    std::vector<CheckResult> checks;
    std::size_t count(Status s) const;
    bool passed() const { return count(Status::kFail) == 0; }
};

// ut_invariance: C-GNN target rows equal on the 2-hop merged/split pair.
CheckResult ut_invariance(const SuiteOptions& o);
// compiled_invariance: the compiled chain-pair formula fires on both targets.
CheckResult compiled_invariance();
// pn_separation: compiled separator reads 1 on the merged target, 0 on split.
CheckResult pn_separation();
// khop_<k>: (k-1)-hop fusion equal, k-hop fusion and the (1,k) separator differ.
CheckResult khop(std::size_t k, const SuiteOptions& o);
// compiler_fuzz: forward bits equal the model checker at every slot.
CheckResult compiler_fuzz(const SuiteOptions& o);

SuiteReport run_suite(const SuiteOptions& o);

nlohmann::ordered_json to_json(const CheckResult& c);
nlohmann::ordered_json summary_json(const SuiteReport& r);

} // namespace pngnn::suite
