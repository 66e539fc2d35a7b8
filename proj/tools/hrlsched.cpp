// Experiment runner: schedule training, synthesis, simulation, requirement
// sweeps and protocol ranking, all driven by a JSON config file.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hrlsched/hrl.hpp"
#include "hrlsched/io.hpp"
#include "hrlsched/ranking.hpp"
#include "hrlsched/slotsim.hpp"

using namespace hrlsched;
namespace fs = std::filesystem;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 2;
};

ExperimentConfig load_config(const GlobalOpts& g) {
    ExperimentConfig cfg =
        g.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config_path);
    if (g.seed_set) cfg.train.seed = g.seed;
    return cfg;
}

void write_manifest(const GlobalOpts& g, const ExperimentConfig& cfg, const std::string& command) {
    json manifest;
    manifest["command"] = command;
    manifest["version"] = kVersion;
    manifest["config_hash"] = hex64(cfg.hash());
    manifest["seed"] = cfg.train.seed;
    manifest["jobs"] = g.jobs;
    write_json_file((fs::path(g.out_dir) / "run_manifest.json").string(), manifest);
}

Requirements parse_phi(const std::string& text) {
    std::istringstream in(text);
    Requirements phi{0, 0, 0};
    char c1, c2;
    if (!(in >> phi.alpha >> c1 >> phi.beta >> c2 >> phi.gamma) || c1 != ',' || c2 != ',')
        throw ConfigError("expected --phi a,b,g");
    phi.validate();
    return phi;
}

RankingWeights parse_weights(const std::string& text) {
    if (text.find(',') == std::string::npos) return RankingWeights::named(text);
    std::istringstream in(text);
    RankingWeights w{0, 0, 0, 0};
    char c1, c2, c3;
    if (!(in >> w.power >> c1 >> w.delay >> c2 >> w.throughput >> c3 >> w.reliability))
        throw ConfigError("expected --weights w1,w2,w3,w4 or a preset name");
    w.validate();
    return w;
}

std::string training_summary_csv(const std::vector<LowTrainOutcome>& lows,
                                 const std::vector<Link>& links) {
    std::string out = "src,dst,kind,episodes,first_decile_reward,last_decile_reward,holdout_ok\n";
    for (const auto& lo : lows) {
        const auto [first, last] = first_last_decile_means(lo.episodes);
        const Link& link = links.at(static_cast<std::size_t>(lo.link_index));
        out += std::to_string(link.first) + "," + std::to_string(link.second) + "," +
               kind_name(lo.kind) + "," + std::to_string(lo.episodes.size()) + "," +
               csv::num(first) + "," + csv::num(last) + "," + csv::num(lo.holdout_nonpenalized) +
               "\n";
    }
    return out;
}

int cmd_train_low(const GlobalOpts& g, const std::string& bank_dir, const std::string& link_text,
                  const std::string& kind_text, bool full_budget) {
    ExperimentConfig cfg = load_config(g);
    if (full_budget) {
        TrainConfig paper;
        paper.seed = cfg.train.seed;
        cfg.train = paper;
    }
    const World world = cfg.make_world();
    fs::create_directories(g.out_dir);

    PolicyBank bank;
    bank.topology_fp = topology_fingerprint(world.graph);
    bank.config_hash = cfg.hash();
    bank.links = world.graph.links();

    std::vector<LowTrainOutcome> outcomes;
    if (!link_text.empty()) {
        std::istringstream in(link_text);
        int src, dst;
        char comma;
        if (!(in >> src >> comma >> dst)) throw ConfigError("expected --link src,dst");
        const int li = world.graph.link_index(src, dst);
        const ActionKind kind = kind_text == "rm" ? ActionKind::Remove : ActionKind::Add;
        TrainConfig tc = cfg.train;
        tc.seed = mix_seed(cfg.train.seed, static_cast<std::uint64_t>(2 * li) +
                                               (kind == ActionKind::Remove ? 1 : 0));
        outcomes.push_back(train_low(world, li, kind, cfg.env, tc));
    } else {
        outcomes = train_low_all(world, cfg.env, cfg.train, g.jobs);
    }
    BankCheckpoints full;
    for (auto& lo : outcomes) {
        if (lo.holdout_nonpenalized < 0.95)
            std::cerr << "warning: policy " << bank.links[lo.link_index].first << "->"
                      << bank.links[lo.link_index].second << " " << kind_name(lo.kind)
                      << " hold-out feasibility " << lo.holdout_nonpenalized << " below 0.95\n";
        bank.lows[PolicyBank::key(lo.link_index, lo.kind)] = lo.net;
        full.lows[PolicyBank::key(lo.link_index, lo.kind)] =
            Checkpoint{lo.net, lo.target, cfg.train.total_steps, lo.rng_state};
    }
    save_bank(bank, bank_dir, &full);
    write_text_file((fs::path(g.out_dir) / "train_low_summary.csv").string(),
                    training_summary_csv(outcomes, bank.links));
    write_manifest(g, cfg, "train-low");
    std::cout << "trained " << outcomes.size() << " lower-level policies into " << bank_dir
              << "\n";
    return 0;
}

int cmd_train_high(const GlobalOpts& g, const std::string& bank_dir, bool full_budget) {
    ExperimentConfig cfg = load_config(g);
    if (full_budget) {
        TrainConfig paper;
        paper.seed = cfg.train.seed;
        cfg.train = paper;
    }
    const World world = cfg.make_world();
    PolicyBank bank = load_bank(bank_dir, world.graph);
    TrainConfig tc = cfg.train;
    tc.seed = mix_seed(cfg.train.seed, 0x416);
    const TrainResult r = train_high(world, bank, cfg.env, tc);
    // write only the high checkpoint and the manifest entry; the low
    // checkpoints on disk keep their full training state
    write_json_file((fs::path(bank_dir) / "high.json").string(),
                    checkpoint_to_json(Checkpoint{r.net, r.target, r.steps, r.rng_state}));
    json manifest = read_json_file((fs::path(bank_dir) / "manifest.json").string());
    manifest["high"] = "high.json";
    write_json_file((fs::path(bank_dir) / "manifest.json").string(), manifest);
    fs::create_directories(g.out_dir);
    const auto [first, last] = first_last_decile_means(r.episodes);
    write_text_file((fs::path(g.out_dir) / "train_high_summary.csv").string(),
                    "episodes,first_decile_reward,last_decile_reward\n" +
                        std::to_string(r.episodes.size()) + "," + csv::num(first) + "," +
                        csv::num(last) + "\n");
    write_manifest(g, cfg, "train-high");
    std::cout << "trained higher-level policy into " << bank_dir << "\n";
    return 0;
}

int cmd_synthesize(const GlobalOpts& g, const std::string& bank_dir, const std::string& phi_text,
                   int budget, const std::string& out_file) {
    const ExperimentConfig cfg = load_config(g);
    const World world = cfg.make_world();
    const PolicyBank bank = load_bank(bank_dir, world.graph);
    const Requirements phi = parse_phi(phi_text);
    const SynthesisResult r = synthesize(world, bank, phi, budget > 0 ? budget : cfg.synth_budget,
                                         cfg.train.seed, cfg.env);
    fs::create_directories(g.out_dir);
    const std::string path =
        out_file.empty() ? (fs::path(g.out_dir) / "schedule.json").string() : out_file;
    write_json_file(path, schedule_to_json(r.schedule));
    const MetricsReport m = world.evaluate(r.schedule);
    std::cout << "schedule " << path << ": cells=" << r.schedule.entries().size()
              << " cost=" << r.cost << " P=" << m.network_power_mw << "mW D="
              << m.network_delay_ms << "ms T=" << m.network_throughput_pps << "pps L="
              << m.loss_rate << (r.stopped_immediately ? " (greedy rollout stopped at step 0)" : "")
              << "\n";
    write_manifest(g, cfg, "synthesize");
    return 0;
}

Scheduler make_scheduler(const ExperimentConfig& cfg, const std::string& kind,
                         const std::string& schedule_file, int slotframe_size) {
    if (kind == "file") {
        if (schedule_file.empty()) throw ConfigError("--schedule required with --scheduler file");
        return learned_scheduler(schedule_from_json(read_json_file(schedule_file)));
    }
    if (kind == "orchestra")
        return orchestra_like(slotframe_size > 0 ? slotframe_size : 11, cfg.num_channels,
                              cfg.slot_ms);
    if (kind == "shared-cell")
        return shared_cell(slotframe_size > 0 ? slotframe_size : 3, cfg.num_channels, cfg.slot_ms);
    throw ConfigError("unknown scheduler '" + kind + "'");
}

int cmd_simulate(const GlobalOpts& g, const std::string& kind, const std::string& schedule_file,
                 int slotframe_size, double duration_s, int retx, const std::string& label,
                 const std::string& table_file, bool trace) {
    const ExperimentConfig cfg = load_config(g);
    const World world = cfg.make_world();
    const Scheduler sched = make_scheduler(cfg, kind, schedule_file, slotframe_size);

    SimConfig sim;
    sim.duration_s = duration_s;
    sim.seed = cfg.train.seed;
    sim.retx_limit = retx;
    sim.collect_trace = trace;
    const SimReport rep = run_simulation(world.graph, world.tree, sched, world.energy, sim);

    fs::create_directories(g.out_dir);
    write_text_file((fs::path(g.out_dir) / "sim_report.csv").string(), sim_report_to_csv(rep));
    if (trace)
        write_text_file((fs::path(g.out_dir) / "sim_trace.csv").string(),
                        trace_to_csv(rep.trace));

    double mean_rate = 0.0;
    for (const auto& n : rep.nodes)
        mean_rate += n.node_id == world.tree.sink()
                         ? static_cast<double>(rep.total_delivered) / sim.duration_s
                         : static_cast<double>(n.tx_success) / sim.duration_s;
    mean_rate /= static_cast<double>(rep.nodes.size());

    if (!table_file.empty()) {
        const bool fresh = !fs::exists(table_file);
        std::ofstream out(table_file, std::ios::app);
        if (fresh) out << "protocol,power_mw,delay_ms,throughput_pps,plr\n";
        out << (label.empty() ? kind : label) << "," << csv::num(rep.mean_power_mw) << ","
            << csv::num(rep.mean_latency_ms) << "," << csv::num(mean_rate) << ","
            << csv::num(rep.network_plr) << "\n";
    }
    std::cout << "PLR=" << rep.network_plr << " meanLatency=" << rep.mean_latency_ms
              << "ms meanPower=" << rep.mean_power_mw << "mW delivered=" << rep.total_delivered
              << "/" << rep.total_generated << " collisions=" << rep.collision_events << "\n";
    write_manifest(g, cfg, "simulate");
    return 0;
}

int cmd_sweep(const GlobalOpts& g, const std::string& bank_dir, double grid_step, int budget,
              bool with_sim, double sim_duration) {
    const ExperimentConfig cfg = load_config(g);
    const World world = cfg.make_world();
    const PolicyBank bank = load_bank(bank_dir, world.graph);
    SweepConfig sc;
    sc.grid_step = grid_step;
    sc.budget = budget > 0 ? budget : cfg.synth_budget;
    sc.seed = cfg.train.seed;
    sc.jobs = g.jobs;
    sc.run_sim = with_sim;
    sc.sim_duration_s = sim_duration;
    const auto rows = sweep_pareto(world, bank, sc, cfg.env);
    fs::create_directories(g.out_dir);
    write_text_file((fs::path(g.out_dir) / "sweep.csv").string(), sweep_to_csv(rows));
    write_manifest(g, cfg, "sweep");
    std::cout << "sweep: " << rows.size() << " requirement points -> "
              << (fs::path(g.out_dir) / "sweep.csv").string() << "\n";
    return 0;
}

int cmd_rank(const GlobalOpts& g, const std::string& table_file, const std::string& weights_text) {
    const ExperimentConfig cfg = load_config(g);
    std::ifstream in(table_file);
    if (!in) throw ConfigError("cannot open " + table_file);
    std::string line;
    std::getline(in, line);  // header
    std::vector<ProtocolMetrics> table;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        ProtocolMetrics p;
        std::string field;
        std::getline(row, p.name, ',');
        std::getline(row, field, ',');
        p.power_mw = std::stod(field);
        std::getline(row, field, ',');
        p.delay_ms = std::stod(field);
        std::getline(row, field, ',');
        p.throughput_pps = std::stod(field);
        std::getline(row, field, ',');
        p.plr = std::stod(field);
        table.push_back(std::move(p));
    }
    const auto ranked = rank_protocols(table, parse_weights(weights_text));
    fs::create_directories(g.out_dir);
    write_text_file((fs::path(g.out_dir) / "ranking.csv").string(), ranking_to_csv(ranked));
    for (const auto& r : ranked) std::cout << r.final_score << "\t" << r.name << "\n";
    write_manifest(g, cfg, "rank");
    return 0;
}

int cmd_compare(const GlobalOpts& g, const std::string& schedule_file, double duration_s) {
    const ExperimentConfig cfg = load_config(g);
    const World world = cfg.make_world();
    const TschSchedule s = schedule_from_json(read_json_file(schedule_file));
    validate_against(s, world.graph);

    SimConfig sim;
    sim.duration_s = duration_s;
    sim.seed = cfg.train.seed;
    const SimReport rep = run_simulation(world.graph, world.tree, learned_scheduler(s),
                                         world.energy, sim);
    const MetricsReport analytic = world.evaluate(s);
    const auto rows = compare_reports(analytic, rep, world.tree.sink(), sim.duration_s);
    fs::create_directories(g.out_dir);
    write_text_file((fs::path(g.out_dir) / "compare.csv").string(), deviations_to_csv(rows));
    const DeviationRow& net = rows.back();
    std::cout << "network rel dev: T=" << net.throughput_rel_dev
              << " P=" << net.power_rel_dev << " D=" << net.delay_rel_dev << "\n";
    write_manifest(g, cfg, "compare");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TSCH schedule synthesis via hierarchical value-based learning"};
    app.set_version_flag("--version", kVersion);
    GlobalOpts g;
    app.add_option("--config", g.config_path, "experiment config JSON");
    app.add_option("--out-dir", g.out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", g.seed, "master seed override");
    app.add_option("--jobs", g.jobs, "worker threads for parallel jobs");

    std::string bank_dir = "bank";
    std::string link_text, kind_text = "add", phi_text, schedule_file, out_file;
    std::string scheduler_kind = "file", label, table_file, weights_text = "balanced";
    int budget = 0, slotframe_size = 0, retx = 0;
    double duration_s = 60.0, grid_step = 0.1, sim_duration = 60.0;
    bool full_budget = false, with_sim = false, trace = false;

    auto* tl = app.add_subcommand("train-low", "train the per-link cell-selection policies");
    tl->add_option("--bank", bank_dir, "policy bank directory");
    tl->add_option("--link", link_text, "train a single policy for src,dst");
    tl->add_option("--kind", kind_text, "add|rm (with --link)")
        ->check(CLI::IsMember({"add", "rm"}));
    tl->add_flag("--full", full_budget, "use the full published training budget");

    auto* th = app.add_subcommand("train-high", "train the link-management policy");
    th->add_option("--bank", bank_dir, "policy bank directory");
    th->add_flag("--full", full_budget, "use the full published training budget");

    auto* sy = app.add_subcommand("synthesize", "emit a schedule for a requirement tuple");
    sy->add_option("--bank", bank_dir, "policy bank directory");
    sy->add_option("--phi", phi_text, "requirement weights a,b,g")->required();
    sy->add_option("--budget", budget, "greedy rollout length");
    sy->add_option("--out", out_file, "schedule output file");

    auto* si = app.add_subcommand("simulate", "run the slot-level simulator");
    si->add_option("--scheduler", scheduler_kind, "file|orchestra|shared-cell")
        ->check(CLI::IsMember({"file", "orchestra", "shared-cell"}));
    si->add_option("--schedule", schedule_file, "learned schedule JSON (with file)");
    si->add_option("--slotframe-size", slotframe_size, "baseline slotframe size");
    si->add_option("--duration", duration_s, "simulated seconds");
    si->add_option("--retx", retx, "retransmission limit (0 disables)");
    si->add_option("--protocol-label", label, "row label for --append-table");
    si->add_option("--append-table", table_file, "append protocol metrics row to CSV");
    si->add_flag("--trace", trace, "emit per-packet trace CSV");

    auto* sw = app.add_subcommand("sweep", "synthesize and evaluate the full requirement grid");
    sw->add_option("--bank", bank_dir, "policy bank directory");
    sw->add_option("--grid-step", grid_step, "simplex grid resolution");
    sw->add_option("--budget", budget, "greedy rollout length");
    sw->add_flag("--with-sim", with_sim, "also simulate each synthesized schedule");
    sw->add_option("--sim-duration", sim_duration, "simulated seconds per grid point");

    auto* rk = app.add_subcommand("rank", "score and rank protocols from a metrics table");
    rk->add_option("--table", table_file, "protocol metrics CSV")->required();
    rk->add_option("--weights", weights_text, "preset name or w1,w2,w3,w4");

    auto* cp = app.add_subcommand("compare", "analytic model vs simulation deviations");
    cp->add_option("--schedule", schedule_file, "learned schedule JSON")->required();
    cp->add_option("--duration", duration_s, "simulated seconds");

    app.require_subcommand(1);
    CLI11_PARSE(app, argc, argv);
    g.seed_set = seed_opt->count() > 0;

    try {
        if (tl->parsed()) return cmd_train_low(g, bank_dir, link_text, kind_text, full_budget);
        if (th->parsed()) return cmd_train_high(g, bank_dir, full_budget);
        if (sy->parsed()) return cmd_synthesize(g, bank_dir, phi_text, budget, out_file);
        if (si->parsed())
            return cmd_simulate(g, scheduler_kind, schedule_file, slotframe_size, duration_s,
                                retx, label, table_file, trace);
        if (sw->parsed()) return cmd_sweep(g, bank_dir, grid_step, budget, with_sim, sim_duration);
        if (rk->parsed()) return cmd_rank(g, table_file, weights_text);
        if (cp->parsed()) return cmd_compare(g, schedule_file, duration_s);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
