#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "pvfc/design.hpp"
#include "pvfc/gains_io.hpp"
#include "pvfc/metrics.hpp"
#include "pvfc/scenario.hpp"
#include "pvfc/simulate.hpp"
#include "pvfc/timeseries.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSynthesis = 3;

void print_observer(const pvfc::ObserverSynthesisResult& obs, double requested) {
    std::printf("observer: certified decay %.6g 1/s (requested %.6g), margin %.3e\n", obs.alpha,
                requested, obs.margin);
    std::printf("  poles %.6g%+.6gi, %.6g%+.6gi; envelope gain %.6g; epsilon %.6g\n",
                obs.poles[0].real(), obs.poles[0].imag(), obs.poles[1].real(),
                obs.poles[1].imag(), obs.kappa, obs.epsilon);
}

void print_feedback(const pvfc::DesignReport& rep) {
    std::printf("current feedback: k1 %.6g, k2 %.6g, gamma %.6g, worst vertex margin %.3e\n",
                rep.feedback.k1, rep.feedback.k2, rep.feedback.gamma,
                rep.feedback.worst_margin);
    if (rep.polished)
        std::printf("  deployed as pure resonant form (k1 = 0), re-certified margin %.3e, "
                    "gamma %.6g\n",
                    rep.polish.margin, rep.polish.gamma);
    else
        std::printf("  deployed as synthesized (projection did not certify)\n");
}

int cmd_synth(double alpha, double lambda, double omega_c, const std::string& out_path) {
    const pvfc::DesignReport rep = pvfc::design_report({}, alpha, lambda, omega_c);
    print_observer(rep.observer, alpha);
    print_feedback(rep);
    pvfc::save_gains_file(rep.gains, out_path);
    std::printf("gains written to %s\n", out_path.c_str());
    return kExitPass;
}

int cmd_verify(const std::string& gains_path, double alpha, double lambda, double omega_c) {
    pvfc::SystemGains g;
    if (gains_path.empty()) {
        const pvfc::DesignReport rep = pvfc::design_report({}, alpha, lambda, omega_c);
        print_observer(rep.observer, alpha);
        print_feedback(rep);
        g = rep.gains;
    } else {
        g = pvfc::load_gains_file(gains_path);
        std::printf("gains loaded from %s\n", gains_path.c_str());
    }
    const pvfc::GainsCheck c = pvfc::verify_gains(g);
    std::printf("observer check: LMI margin %.3e at decay %.6g, weight min eigenvalue %.3e, "
                "poles %.6g%+.6gi / %.6g%+.6gi -> %s\n",
                c.observer_margin, g.alpha, c.k_min_eig, c.observer_poles[0].real(),
                c.observer_poles[0].imag(), c.observer_poles[1].real(),
                c.observer_poles[1].imag(), c.observer_ok() ? "PASS" : "FAIL");
    std::printf("feedback check: certificate margin %.3e, gamma %.6g -> %s\n",
                c.feedback.margin, c.feedback.gamma,
                c.feedback.ok && c.feedback.margin < 0.0 ? "PASS" : "FAIL");
    std::printf("overall: %s\n", c.ok() ? "PASS" : "FAIL");
    return c.ok() ? kExitPass : kExitFail;
}

pvfc::ScenarioConfig make_config(int case_id, const std::string& config_path,
                                 const std::string& gains_path) {
    if ((case_id == 0) == config_path.empty())
        throw pvfc::ConfigError("exactly one of --case and --config is required");
    pvfc::ScenarioConfig cfg =
        case_id ? pvfc::builtin_case(case_id) : pvfc::load_scenario_file(config_path);
    if (!gains_path.empty()) cfg.gains_file = gains_path;
    return cfg;
}

int cmd_run(int case_id, const std::string& config_path, const std::string& gains_path,
            std::string out_path) {
    const pvfc::ScenarioConfig cfg = make_config(case_id, config_path, gains_path);
    if (out_path.empty()) out_path = cfg.name + ".csv";
    const pvfc::RunResult res = pvfc::run_scenario(cfg);
    pvfc::save_csv(res.series, out_path);
    std::fputs(pvfc::render_report(res.report).c_str(), stdout);
    std::printf("series written to %s (%zu rows)\n", out_path.c_str(), res.series.size());
    return res.report.all_pass() ? kExitPass : kExitFail;
}

int cmd_report(const std::string& csv_path, int case_id, const std::string& config_path) {
    const pvfc::ScenarioConfig cfg = make_config(case_id, config_path, "");
    const pvfc::TimeSeries ts = pvfc::load_csv(csv_path);
    pvfc::MetricsReport rep = pvfc::compute_metrics(ts, cfg);
    pvfc::evaluate_criteria(rep);
    std::fputs(pvfc::render_report(rep).c_str(), stdout);
    return rep.all_pass() ? kExitPass : kExitFail;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"grid-connected hybrid PV/fuel-cell plant: controller synthesis and "
                 "scenario runner"};
    app.require_subcommand(1);

    double alpha = 50.0, lambda = 500.0, omega_c = 12000.0;
    std::string gains_out = "gains.txt";
    auto* synth = app.add_subcommand("synth", "synthesize controller gains and certificates");
    synth->add_option("--alpha", alpha, "required dc-observer decay rate, 1/s");
    synth->add_option("--lambda", lambda, "current-loop integral-action rate, 1/s");
    synth->add_option("--omega-c", omega_c, "repetitive filter corner, rad/s");
    synth->add_option("--out", gains_out, "gains file to write");

    int case_id = 0;
    std::string config_path, gains_path, csv_out;
    auto* run = app.add_subcommand("run", "simulate a scenario and evaluate its metrics");
    run->add_option("--case", case_id, "bundled study case (1..4)");
    run->add_option("--config", config_path, "JSON scenario description");
    run->add_option("--gains", gains_path, "gains file (default: synthesize)");
    run->add_option("--out", csv_out, "output CSV path (default: <name>.csv)");

    auto* verify = app.add_subcommand("verify", "re-check the stability certificates");
    verify->add_option("--gains", gains_path, "gains file to check (default: synthesize)");
    verify->add_option("--alpha", alpha, "decay rate when synthesizing, 1/s");
    verify->add_option("--lambda", lambda, "integral-action rate when synthesizing, 1/s");
    verify->add_option("--omega-c", omega_c, "filter corner when synthesizing, rad/s");

    std::string csv_in;
    auto* report = app.add_subcommand("report", "re-derive metrics from a run's CSV");
    report->add_option("--csv", csv_in, "CSV written by run")->required();
    report->add_option("--case", case_id, "bundled study case the CSV came from");
    report->add_option("--config", config_path, "JSON scenario the CSV came from");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitConfig;
    }

    try {
        if (synth->parsed()) return cmd_synth(alpha, lambda, omega_c, gains_out);
        if (run->parsed()) return cmd_run(case_id, config_path, gains_path, csv_out);
        if (verify->parsed()) return cmd_verify(gains_path, alpha, lambda, omega_c);
        if (report->parsed()) return cmd_report(csv_in, case_id, config_path);
    } catch (const pvfc::SynthesisFailure& e) {
        std::fprintf(stderr, "synthesis failed: %s (best margin %.3e)\n", e.what(),
                     e.best_margin);
        return kExitSynthesis;
    } catch (const pvfc::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const pvfc::InvalidInput& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const pvfc::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFail;
    }
    return kExitConfig;
}
