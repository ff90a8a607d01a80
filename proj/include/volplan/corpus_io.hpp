#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "volplan/scenario.hpp"

// Scenario corpora are JSONL: one scenario object per line, numbers at full
// precision. Field layout is documented in schema/scenario.schema.json.

namespace volplan {

class CorpusError : public std::runtime_error {
public:
    CorpusError(std::size_t line, const std::string& what)
        : std::runtime_error("corpus line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(std::string_view line);

void write_corpus(const std::filesystem::path& path, std::span<const Scenario> scenarios);
// Blank lines are skipped; every scenario is validated against its profile.
std::vector<Scenario> read_corpus(const std::filesystem::path& path);

}  // namespace volplan
