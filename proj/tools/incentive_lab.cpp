#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "incentive_lab/agents.hpp"
#include "incentive_lab/config.hpp"
#include "incentive_lab/csv.hpp"
#include "incentive_lab/error.hpp"
#include "incentive_lab/incentive.hpp"
#include "incentive_lab/models.hpp"
#include "incentive_lab/pipeline.hpp"
#include "incentive_lab/report.hpp"
#include "incentive_lab/stats/glmm.hpp"
#include "incentive_lab/stats/rank_tests.hpp"
#include "incentive_lab/version.hpp"

namespace il = incentive_lab;
using json = nlohmann::ordered_json;

namespace {

int exit_code_for(il::ErrorCode c) {
    switch (c) {
        case il::ErrorCode::InfeasibleSpec: return 1;
        case il::ErrorCode::NonConvergence: return 3;
        default: return 2;
    }
}

void print_error(std::string_view code, const std::string& message) {
    json e{{"error", code}, {"message", message}};
    std::cerr << e.dump() << '\n';
}

// ---------------------------------------------------------------- schedule

struct ScheduleArgs {
    int m = 30;
    std::int64_t budget = 3000;
    std::int64_t cap = 300;
    std::string policy = "random";
    std::int64_t amount = 100;
    int count = 1;
    std::uint64_t seed = 1;
    std::string out = "schedules.csv";
};

int cmd_schedule(const ScheduleArgs& a) {
    il::ScheduleSpec spec{a.m, il::Cents{a.budget}, il::Cents{a.cap}, il::RandomLoss{}};
    if (a.policy == "fixed") spec.policy = il::FixedLoss{il::Cents{a.amount}};
    spec.validate();
    std::vector<std::pair<std::string, il::IncentiveSchedule>> rows;
    std::vector<il::IncentiveSchedule> all;
    il::GenerationStats gen;
    for (int i = 0; i < a.count; ++i) {
        auto rng = il::RandomStream::derive(a.seed, "schedule", static_cast<std::uint64_t>(i));
        auto s = il::generate_schedule(spec, rng, &gen);
        rows.emplace_back(il::participant_id_for(i), s);
        all.push_back(std::move(s));
    }
    std::ofstream f(a.out, std::ios::binary);
    if (!f) il::fail(il::ErrorCode::IoError, "cannot write: " + a.out);
    il::write_schedules_csv(f, rows);
    const auto st = il::schedule_stats(all);
    json j{{"policy", a.policy},
           {"schedules", a.count},
           {"entries", st.count},
           {"mean_cents", st.mean},
           {"sd_cents", st.sd},
           {"mean_schedule_sd_cents", st.mean_schedule_sd},
           {"min_cents", st.min.value},
           {"max_cents", st.max.value},
           {"draws", gen.draws},
           {"rejected_draws", gen.rejected},
           {"bin_width_cents", st.bin_width},
           {"histogram", st.histogram},
           {"out", a.out}};
    std::cout << j.dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out_dir;
    bool post_phase = false;
};

int cmd_simulate(const SimulateArgs& a) {
    il::TrialConfig cfg = a.config_path.empty() ? il::TrialConfig{} : il::config::load(a.config_path);
    if (const char* env = std::getenv("INCENTIVE_LAB_SEED"); env && *env) {
        std::uint64_t s = 0;
        const std::string v(env);
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
        if (ec != std::errc{} || ptr != v.data() + v.size())
            il::fail(il::ErrorCode::ParseError, "INCENTIVE_LAB_SEED is not an unsigned integer: " + v);
        cfg.seed = s;
    }
    if (a.seed) cfg.seed = *a.seed;
    if (a.workers) cfg.workers = *a.workers;
    if (a.post_phase) cfg.post_phase.enabled = true;
    cfg.population.seed = cfg.seed;
    cfg.validate();
    const auto out = il::pipeline::simulate_to_directory(cfg, a.out_dir);
    const auto& s = out.summary;
    json j{{"out_dir", a.out_dir},
           {"seed", cfg.seed},
           {"files", out.files},
           {"median_compliance_days", {{"treatment", s.median_treatment}, {"control", s.median_control}}},
           {"mann_whitney_p", s.mann_whitney.p_value}};
    std::cout << j.dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
    std::string data;
    int model = 1;
    std::string out;
    bool all_participants = false;
    int nodes = 15;
};

int cmd_fit(const FitArgs& a) {
    const il::csv::Table table = il::report::read_table(a.data);
    const auto data = il::models::build(table, a.model, !a.all_participants);
    il::stats::GlmmOptions opt;
    opt.quadrature_nodes = a.nodes;
    const auto fit = il::stats::glmm_logistic_fit(data, opt);
    const std::string body = il::models::to_json(fit, a.model).dump(2) + "\n";
    if (a.out.empty()) {
        std::cout << body;
    } else {
        il::report::write_text(a.out, body);
    }
    if (!fit.converged) {
        print_error(il::to_string(il::ErrorCode::NonConvergence),
                    "gradient norm " + std::to_string(fit.gradient_norm) + " above tolerance");
        return 3;
    }
    return 0;
}

// ---------------------------------------------------------------- test

struct TestArgs {
    std::string data;
    std::string column;
    std::string by = "arm";
    std::string x_level = "treatment";
    std::string y_level = "control";
    std::string filter;
    std::string table;
    std::string columns;
    bool yates = false;
    std::string pre;
    std::string post;
};

double parse_cell(const std::string& s, const std::string& column) { return il::models::to_double(s, column); }

bool keep_row(const il::csv::Table& t, const std::vector<std::string>& row, const std::string& filter) {
    if (filter.empty()) return true;
    const auto eq = filter.find('=');
    if (eq == std::string::npos) il::fail(il::ErrorCode::ParseError, "--filter expects column=value");
    return row[t.column(filter.substr(0, eq))] == filter.substr(eq + 1);
}

int cmd_test_mann_whitney(const TestArgs& a) {
    const il::csv::Table t = il::report::read_table(a.data);
    const auto c = t.column(a.column), g = t.column(a.by);
    std::vector<double> x, y;
    for (const auto& row : t.rows) {
        if (!keep_row(t, row, a.filter)) continue;
        if (row[g] == a.x_level) x.push_back(parse_cell(row[c], a.column));
        else if (row[g] == a.y_level) y.push_back(parse_cell(row[c], a.column));
    }
    std::cout << il::report::to_json(il::stats::mann_whitney_u(x, y)).dump() << '\n';
    return 0;
}

int cmd_test_chi_square(const TestArgs& a) {
    std::array<std::array<double, 2>, 2> tab{};
    if (!a.table.empty()) {
        const auto parts = il::csv::split_line(a.table);
        if (parts.size() != 4) il::fail(il::ErrorCode::ParseError, "--table expects a,b,c,d");
        for (std::size_t i = 0; i < 4; ++i) tab[i / 2][i % 2] = parse_cell(parts[i], "table");
    } else {
        const il::csv::Table t = il::report::read_table(a.data);
        const auto cols = il::csv::split_line(a.columns);
        if (cols.size() != 2) il::fail(il::ErrorCode::ParseError, "--columns expects two binary columns");
        for (std::size_t r = 0; r < 2; ++r) {
            const auto c = t.column(cols[r]);
            for (const auto& row : t.rows) {
                if (!keep_row(t, row, a.filter)) continue;
                tab[r][parse_cell(row[c], cols[r]) != 0.0 ? 0 : 1] += 1;
            }
        }
    }
    std::cout << il::report::to_json(il::stats::chi_square_2x2(tab, a.yates)).dump() << '\n';
    return 0;
}

int cmd_test_wilcoxon(const TestArgs& a) {
    const il::csv::Table t = il::report::read_table(a.data);
    const auto cp = t.column(a.pre), cq = t.column(a.post);
    std::vector<std::pair<double, double>> pairs;
    for (const auto& row : t.rows)
        if (keep_row(t, row, a.filter)) pairs.emplace_back(parse_cell(row[cp], a.pre), parse_cell(row[cq], a.post));
    std::cout << il::report::to_json(il::stats::wilcoxon_signed_rank(pairs)).dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------- report

int cmd_report(const std::string& run_dir) {
    const auto files = il::report::write_report(run_dir);
    std::cout << json{{"run_dir", run_dir}, {"files", files.written}}.dump() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random-loss incentive trial simulator and analysis toolkit"};
    app.set_version_flag("--version", std::string(il::kVersion));
    app.require_subcommand(1);

    ScheduleArgs sa;
    auto* sched = app.add_subcommand("schedule", "Generate deduction schedules");
    sched->add_option("--m", sa.m, "Days per schedule")->check(CLI::PositiveNumber);
    sched->add_option("--budget", sa.budget, "Total budget in cents")->check(CLI::NonNegativeNumber);
    sched->add_option("--cap", sa.cap, "Per-day cap in cents")->check(CLI::NonNegativeNumber);
    sched->add_option("--policy", sa.policy, "random or fixed")->check(CLI::IsMember({"random", "fixed"}));
    sched->add_option("--amount", sa.amount, "Fixed per-day amount in cents")->check(CLI::NonNegativeNumber);
    sched->add_option("--count", sa.count, "Number of schedules")->check(CLI::PositiveNumber);
    sched->add_option("--seed", sa.seed, "Random seed");
    sched->add_option("--out", sa.out, "Output CSV path");

    SimulateArgs sim;
    auto* simc = app.add_subcommand("simulate", "Run the trial and write datasets");
    simc->add_option("--config", sim.config_path, "Config file (key = value)")->check(CLI::ExistingFile);
    simc->add_option("--seed", sim.seed, "Seed; overrides config and INCENTIVE_LAB_SEED");
    simc->add_option("--workers", sim.workers, "Worker threads")->check(CLI::PositiveNumber);
    simc->add_option("--out", sim.out_dir, "Output directory")->required();
    simc->add_flag("--post-phase", sim.post_phase, "Also simulate the post-study phase");

    FitArgs fa;
    auto* fitc = app.add_subcommand("fit", "Fit a mixed-effects logistic model to compliance.csv");
    fitc->add_option("--data", fa.data, "Compliance CSV")->required()->check(CLI::ExistingFile);
    fitc->add_option("--model", fa.model, "Covariate set 1..8")->check(CLI::Range(1, il::models::kModelCount));
    fitc->add_option("--out", fa.out, "Output JSON path (default stdout)");
    fitc->add_flag("--all-participants", fa.all_participants, "Include participants without deductions");
    fitc->add_option("--nodes", fa.nodes, "Quadrature nodes")->check(CLI::Range(1, il::stats::kMaxQuadratureNodes));

    TestArgs ta;
    auto* testc = app.add_subcommand("test", "Nonparametric tests on CSV columns");
    testc->require_subcommand(1);
    auto* mw = testc->add_subcommand("mann-whitney", "Two-sample Mann-Whitney U");
    mw->add_option("--data", ta.data)->required()->check(CLI::ExistingFile);
    mw->add_option("--column", ta.column)->required();
    mw->add_option("--by", ta.by, "Grouping column");
    mw->add_option("--x", ta.x_level, "First group level");
    mw->add_option("--y", ta.y_level, "Second group level");
    mw->add_option("--filter", ta.filter, "Keep rows with column=value");
    auto* chi = testc->add_subcommand("chi-square", "Chi-square test on a 2x2 table");
    auto* tab_opt = chi->add_option("--table", ta.table, "Counts a,b,c,d (row major)");
    auto* data_opt = chi->add_option("--data", ta.data)->check(CLI::ExistingFile);
    chi->add_option("--columns", ta.columns, "Two binary columns forming the rows")->needs(data_opt);
    chi->add_option("--filter", ta.filter, "Keep rows with column=value");
    chi->add_flag("--yates", ta.yates, "Continuity correction");
    tab_opt->excludes(data_opt);
    auto* wx = testc->add_subcommand("wilcoxon", "Wilcoxon signed-rank on paired columns");
    wx->add_option("--data", ta.data)->required()->check(CLI::ExistingFile);
    wx->add_option("--pre", ta.pre)->required();
    wx->add_option("--post", ta.post)->required();
    wx->add_option("--filter", ta.filter, "Keep rows with column=value");

    std::string run_dir;
    auto* rep = app.add_subcommand("report", "Charts and summary from a simulate run");
    rep->add_option("--run-dir", run_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("UsageError", e.what());
        return 2;
    }

    try {
        if (*sched) return cmd_schedule(sa);
        if (*simc) return cmd_simulate(sim);
        if (*fitc) return cmd_fit(fa);
        if (*mw) return cmd_test_mann_whitney(ta);
        if (*chi) {
            if (ta.table.empty() && ta.columns.empty())
                il::fail(il::ErrorCode::InvalidSpec, "chi-square needs --table or --data with --columns");
            return cmd_test_chi_square(ta);
        }
        if (*wx) return cmd_test_wilcoxon(ta);
        if (*rep) return cmd_report(run_dir);
    } catch (const il::LabError& e) {
        print_error(il::to_string(e.code()), e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        print_error("InternalError", e.what());
        return 2;
    }
    return 2;
}
