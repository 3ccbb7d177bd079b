#pragma once

#include "robustdet/attack/dire_attack.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace robustdet::eval {

enum class Setting { kWithoutAT, kWithAT };
enum class Protocol { kAllSet, kCrossDomain };
enum class ReportFormat { kCsv, kJson, kMarkdown };

std::string_view to_string(Setting s);
std::string_view to_string(Protocol p);
Setting parse_setting(std::string_view text);
Protocol parse_protocol(std::string_view text);
ReportFormat parse_report_format(std::string_view text);

/// Method names used as table rows.
inline constexpr const char* kMethodPixelConv = "pixel-conv";
inline constexpr const char* kMethodPixelAttention = "pixel-attention";
inline constexpr const char* kMethodDire = "dire";

struct EvalCell {
    double acc_clean = 0.0;
    double acc_adv = 0.0;
    std::optional<double> robustness_score;

    friend bool operator==(const EvalCell&, const EvalCell&) = default;
};

struct CellKey {
    std::string method;
    std::string dataset;
    Setting setting = Setting::kWithoutAT;

    auto operator<=>(const CellKey&) const = default;
};

struct AttackEcho {
    double epsilon = 0.0;
    double step_size = 0.0;
    std::size_t num_steps = 0;
    bool random_init = false;
    std::string grad_mode;

    friend bool operator==(const AttackEcho&, const AttackEcho&) = default;
};

AttackEcho echo(const attack::AttackConfig& cfg, attack::GradMode mode);

struct EvalReport {
    static constexpr int kSchemaVersion = 1;

    Protocol protocol = Protocol::kAllSet;
    AttackEcho attack;
    /// Row order for rendering.
    std::vector<std::string> methods;
    std::vector<std::string> datasets;
    /// Datasets whose training splits were used; empty for all-set.
    std::vector<std::string> training_datasets;
    std::vector<std::string> held_out_datasets;
    std::map<CellKey, EvalCell> cells;

    /// Cells of methods x datasets x {w/o AT, w/ AT} that are absent.
    std::vector<CellKey> missing_cells() const;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Deterministic text rendering. Throws ReportError listing the missing
/// cells if the grid is incomplete.
std::string render_report(const EvalReport& report, ReportFormat format);

/// Inverse of render_report(..., kJson). Throws ReportError on malformed input.
EvalReport parse_report_json(const std::string& text);

}  // namespace robustdet::eval
