#include "volplan/text_codec.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>

namespace volplan {

namespace {

// Odd multiples of 1/8 are the only doubles that sit exactly halfway between
// two hundredths; to_chars breaks those ties to even.
bool exact_hundredth_tie(double x) {
    const double eighths = std::abs(x) * 8.0;
    if (eighths >= 0x1p52) return false;
    return eighths == std::floor(eighths) && std::fmod(eighths, 2.0) == 1.0;
}

std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.substr(0, prefix.size()) == prefix;
}

double parse_number(std::string_view token) {
    token = trim(token);
    double value = 0.0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::fixed);
    if (token.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw PlanParseError(PlanParseError::Kind::MalformedNumber,
                             "malformed number '" + std::string(token) + "'");
    }
    return value;
}

Vec2 parse_pair(std::string_view item) {
    item = trim(item);
    if (item.size() < 2 || item.front() != '(' || item.back() != ')') {
        throw PlanParseError(PlanParseError::Kind::MalformedNumber,
                             "malformed pair '" + std::string(item) + "'");
    }
    item = item.substr(1, item.size() - 2);
    const auto comma = item.find(',');
    if (comma == std::string_view::npos) {
        throw PlanParseError(PlanParseError::Kind::MalformedNumber,
                             "pair without separator '" + std::string(item) + "'");
    }
    return {parse_number(item.substr(0, comma)), parse_number(item.substr(comma + 1))};
}

std::string format_pair(const Vec2& v) { return "(" + format2(v.x) + ", " + format2(v.y) + ")"; }

}  // namespace

std::string format2(double x) {
    char buf[64];
    if (exact_hundredth_tie(x)) {
        const auto hundredths = static_cast<std::int64_t>(std::llround(std::abs(x) * 100.0));
        std::string digits = std::to_string(hundredths);
        if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
        digits.insert(digits.size() - 2, ".");
        return (x < 0.0 ? "-" : "") + digits;
    }
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, 2);
    if (ec != std::errc()) return "nan";
    std::string out(buf, ptr);
    if (out == "-0.00") out = "0.00";
    return out;
}

double quantize2(double x) { return parse_number(format2(x)); }

std::string encode_prompt(const EgoStateHistory& history, BehaviorCommand command) {
    std::string out = "command: ";
    out += to_string(command);
    out += '\n';
    const auto& steps = history.steps();
    for (std::size_t i = 0; i < steps.size(); ++i) {
        out += "history[" + std::to_string(history.step_offset(i)) + "]: p=" +
               format_pair(steps[i].position) + " v=" + format_pair(steps[i].velocity) +
               " a=" + format_pair(steps[i].acceleration) + '\n';
    }
    return out;
}

std::string encode_target(const std::vector<MetaDecision>& decisions, const PlanTrajectory& traj,
                          int expected_stages) {
    if (static_cast<int>(decisions.size()) != expected_stages) {
        throw std::invalid_argument("target needs " + std::to_string(expected_stages) +
                                    " decision stages, got " + std::to_string(decisions.size()));
    }
    std::string out;
    for (std::size_t s = 0; s < decisions.size(); ++s) {
        out += "decision[" + std::to_string(s + 1) + "]: ";
        out += to_string(decisions[s]);
        out += '\n';
    }
    out += "waypoints: ";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (i > 0) out += ';';
        out += format_pair(traj[i]);
    }
    out += '\n';
    return out;
}

DecodedPlan decode_plan(std::string_view text, int expected_stages, std::size_t expected_waypoints,
                        double frequency_hz) {
    std::vector<MetaDecision> decisions;
    std::vector<Vec2> waypoints;
    bool saw_waypoints = false;

    while (!text.empty()) {
        const auto nl = text.find('\n');
        const std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty()) continue;

        if (starts_with(line, "decision[")) {
            const auto colon = line.find(':');
            if (colon == std::string_view::npos) {
                throw PlanParseError(PlanParseError::Kind::MissingSection, "decision line without ':'");
            }
            const std::string_view token = trim(line.substr(colon + 1));
            const auto d = parse_decision(token);
            if (!d) {
                throw PlanParseError(PlanParseError::Kind::UnknownDecision,
                                     "unknown decision '" + std::string(token) + "'");
            }
            decisions.push_back(*d);
        } else if (starts_with(line, "waypoints:")) {
            if (saw_waypoints) {
                throw PlanParseError(PlanParseError::Kind::CountMismatch, "duplicate waypoints section");
            }
            saw_waypoints = true;
            std::string_view rest = trim(line.substr(10));
            while (!rest.empty()) {
                const auto semi = rest.find(';');
                waypoints.push_back(parse_pair(rest.substr(0, semi)));
                rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
            }
        }
    }

    if (!saw_waypoints) {
        throw PlanParseError(PlanParseError::Kind::MissingSection, "no waypoints section");
    }
    if (static_cast<int>(decisions.size()) != expected_stages) {
        throw PlanParseError(PlanParseError::Kind::CountMismatch,
                             "expected " + std::to_string(expected_stages) + " decisions, got " +
                                 std::to_string(decisions.size()));
    }
    if (waypoints.size() != expected_waypoints) {
        throw PlanParseError(PlanParseError::Kind::CountMismatch,
                             "expected " + std::to_string(expected_waypoints) + " waypoints, got " +
                                 std::to_string(waypoints.size()));
    }
    return {std::move(decisions), PlanTrajectory::from_waypoints(std::move(waypoints), frequency_hz)};
}

DecodedPlan decode_plan(std::string_view text, const PlanningProfile& profile) {
    return decode_plan(text, profile.decision_stages, profile.horizon_steps(), profile.frequency_hz);
}

}  // namespace volplan
