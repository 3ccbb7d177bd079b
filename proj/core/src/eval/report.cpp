#include "robustdet/eval/report.hpp"

#include "robustdet/core/error.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>

namespace robustdet::eval {

std::string_view to_string(Setting s) { return s == Setting::kWithAT ? "w_at" : "wo_at"; }
std::string_view to_string(Protocol p) { return p == Protocol::kCrossDomain ? "cross-domain" : "all-set"; }

Setting parse_setting(std::string_view text) {
    if (text == "wo_at") return Setting::kWithoutAT;
    if (text == "w_at") return Setting::kWithAT;
    throw ConfigError("setting", "expected wo_at|w_at, got '" + std::string(text) + "'");
}

Protocol parse_protocol(std::string_view text) {
    if (text == "all-set") return Protocol::kAllSet;
    if (text == "cross-domain") return Protocol::kCrossDomain;
    throw ConfigError("evaluation.protocol", "expected all-set|cross-domain, got '" + std::string(text) + "'");
}

ReportFormat parse_report_format(std::string_view text) {
    if (text == "csv") return ReportFormat::kCsv;
    if (text == "json") return ReportFormat::kJson;
    if (text == "markdown" || text == "markdown-table") return ReportFormat::kMarkdown;
    throw ConfigError("format", "expected csv|json|markdown, got '" + std::string(text) + "'");
}

AttackEcho echo(const attack::AttackConfig& cfg, attack::GradMode mode) {
    return {cfg.epsilon, cfg.step_size, cfg.num_steps, cfg.random_init, std::string(attack::to_string(mode))};
}

std::vector<CellKey> EvalReport::missing_cells() const {
    std::vector<CellKey> missing;
    for (const auto& m : methods) {
        for (const auto& d : datasets) {
            for (Setting s : {Setting::kWithoutAT, Setting::kWithAT}) {
                CellKey key{m, d, s};
                if (!cells.contains(key)) missing.push_back(std::move(key));
            }
        }
    }
    return missing;
}

namespace {

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", v * 100.0);
    return buf;
}

std::string score_text(const std::optional<double>& s) {
    if (!s) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *s);
    return buf;
}

std::string number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void require_complete(const EvalReport& r) {
    const auto missing = r.missing_cells();
    if (missing.empty()) return;
    std::string msg = "report is incomplete; missing cells:";
    for (const auto& k : missing) msg += " (" + k.method + ", " + k.dataset + ", " + std::string(to_string(k.setting)) + ")";
    throw ReportError(msg);
}

std::string render_csv(const EvalReport& r) {
    std::string out = "method,dataset,setting,acc_clean,acc_adv,robustness_score\n";
    for (const auto& m : r.methods) {
        for (const auto& d : r.datasets) {
            for (Setting s : {Setting::kWithoutAT, Setting::kWithAT}) {
                const EvalCell& c = r.cells.at({m, d, s});
                out += m + "," + d + "," + std::string(to_string(s)) + "," + number(c.acc_clean) + "," +
                       number(c.acc_adv) + "," + (c.robustness_score ? number(*c.robustness_score) : "") + "\n";
            }
        }
    }
    return out;
}

std::string render_markdown(const EvalReport& r) {
    std::string out =
        "| Method | Dataset | Clean w/o AT | Clean w/ AT | Adv w/o AT | Adv w/ AT | Score w/o AT | Score w/ AT |\n"
        "|---|---|---|---|---|---|---|---|\n";
    for (const auto& m : r.methods) {
        for (const auto& d : r.datasets) {
            const EvalCell& wo = r.cells.at({m, d, Setting::kWithoutAT});
            const EvalCell& w = r.cells.at({m, d, Setting::kWithAT});
            out += "| " + m + " | " + d + " | " + percent(wo.acc_clean) + " | " + percent(w.acc_clean) + " | " +
                   percent(wo.acc_adv) + " | " + percent(w.acc_adv) + " | " + score_text(wo.robustness_score) +
                   " | " + score_text(w.robustness_score) + " |\n";
        }
    }
    return out;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["schema_version"] = EvalReport::kSchemaVersion;
    j["protocol"] = std::string(to_string(r.protocol));
    j["attack"] = {{"epsilon", r.attack.epsilon},
                   {"alpha", r.attack.step_size},
                   {"steps", r.attack.num_steps},
                   {"random_init", r.attack.random_init},
                   {"grad_mode", r.attack.grad_mode}};
    j["methods"] = r.methods;
    j["datasets"] = r.datasets;
    j["training_datasets"] = r.training_datasets;
    j["held_out_datasets"] = r.held_out_datasets;
    auto cells = nlohmann::ordered_json::array();
    for (const auto& [k, c] : r.cells) {
        nlohmann::ordered_json cell;
        cell["method"] = k.method;
        cell["dataset"] = k.dataset;
        cell["setting"] = std::string(to_string(k.setting));
        cell["acc_clean"] = c.acc_clean;
        cell["acc_adv"] = c.acc_adv;
        cell["robustness_score"] = c.robustness_score ? nlohmann::ordered_json(*c.robustness_score) : nlohmann::ordered_json(nullptr);
        cells.push_back(std::move(cell));
    }
    j["cells"] = std::move(cells);
    return j;
}

}  // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
    require_complete(report);
    switch (format) {
        case ReportFormat::kCsv: return render_csv(report);
        case ReportFormat::kMarkdown: return render_markdown(report);
        case ReportFormat::kJson: return to_json(report).dump(2) + "\n";
    }
    throw ReportError("unknown report format");
}

EvalReport parse_report_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("schema_version").get<int>() != EvalReport::kSchemaVersion) {
            throw ReportError("unsupported report schema version " + j.at("schema_version").dump());
        }
        EvalReport r;
        r.protocol = parse_protocol(j.at("protocol").get<std::string>());
        const auto& a = j.at("attack");
        r.attack = {a.at("epsilon").get<double>(), a.at("alpha").get<double>(), a.at("steps").get<std::size_t>(),
                    a.at("random_init").get<bool>(), a.at("grad_mode").get<std::string>()};
        r.methods = j.at("methods").get<std::vector<std::string>>();
        r.datasets = j.at("datasets").get<std::vector<std::string>>();
        r.training_datasets = j.at("training_datasets").get<std::vector<std::string>>();
        r.held_out_datasets = j.at("held_out_datasets").get<std::vector<std::string>>();
        for (const auto& c : j.at("cells")) {
            EvalCell cell{c.at("acc_clean").get<double>(), c.at("acc_adv").get<double>(), std::nullopt};
            if (!c.at("robustness_score").is_null()) cell.robustness_score = c.at("robustness_score").get<double>();
            r.cells[{c.at("method").get<std::string>(), c.at("dataset").get<std::string>(),
                     parse_setting(c.at("setting").get<std::string>())}] = cell;
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ReportError(std::string("malformed report JSON: ") + e.what());
    } catch (const ConfigError& e) {
        throw ReportError(std::string("malformed report JSON: ") + e.what());
    }
}

}  // namespace robustdet::eval
