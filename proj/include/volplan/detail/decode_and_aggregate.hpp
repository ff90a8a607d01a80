#pragma once

#include <string>

#include "volplan/text_codec.hpp"

namespace volplan {

template <typename SampleFn>
PlanResult decode_and_aggregate(SampleFn&& sample, const SamplingConfig& sampling, const PlanningProfile& profile,
                                std::uint64_t seed) {
    sampling.validate();
    const bool greedy = sampling.aggregation == Aggregation::Greedy;
    const int draws = greedy ? 1 : sampling.k;

    PlanResult result;
    std::vector<std::vector<MetaDecision>> votes;
    for (int k = 0; k < draws; ++k) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        double log_likelihood = 0.0;
        const std::string text = sample(rng, greedy, log_likelihood);
        try {
            DecodedPlan decoded = decode_plan(text, profile);
            result.candidates.trajectories.push_back(std::move(decoded.trajectory));
            result.candidates.log_likelihoods.push_back(log_likelihood);
            votes.push_back(std::move(decoded.decisions));
        } catch (const PlanParseError&) {
            ++result.dropped;
        }
    }
    if (result.candidates.size() == 0) throw PlanningError("every sampled candidate failed to parse");
    result.decisions = majority_decisions(votes);
    result.trajectory = sampling.aggregation == Aggregation::LikelihoodWeighted
                            ? aggregate_likelihood_weighted(result.candidates)
                            : aggregate_candidates(result.candidates);
    return result;
}

}  // namespace volplan
