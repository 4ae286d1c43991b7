// natadv: measure and harden the robustness of a cooperative robot policy by
// training natural-yet-adversarial partners, building the natural-adversarial
// frontier, and fine-tuning against its failure cases.

#include <atomic>
#include <cstdio>
#include <limits>
#include <mutex>
#include <sstream>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "natadv/adversary.hpp"
#include "natadv/config.hpp"
#include "natadv/frontier.hpp"
#include "natadv/rigid.hpp"
#include "natadv/rl.hpp"
#include "natadv/robustgt.hpp"
#include "natadv/runstore.hpp"

using namespace natadv;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Cli {
    std::string config_path;
    std::string out_dir = "natadv-out";
    std::uint64_t seed = 1;
    int jobs = 1;

    RunConfig config() const {
        if (config_path.empty()) return RunConfig{};
        return load_run_config(config_path);
    }

    RunStore store() const { return RunStore(fs::path(out_dir)); }
};

std::string hex16(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string make_run_id(const std::string& kind, const json& ingredients) {
    const std::string dump = ingredients.dump();
    return kind + "-" + hex16(fnv1a64(dump.data(), dump.size()));
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void write_metrics_csv(const fs::path& path, const std::vector<IterationMetrics>& rows) {
    std::string out = metrics_csv_header() + "\n";
    for (const auto& m : rows) out += metrics_csv_row(m) + "\n";
    write_text(path, out);
}

GaussianPolicy load_policy_checked(const std::string& path) {
    if (!fs::exists(path)) throw NotFoundError("checkpoint not found: " + path);
    return load_policy(path);
}

CanonicalDataset load_canonical_checked(const std::string& path) {
    if (!fs::exists(path)) throw NotFoundError("canonical dataset not found: " + path);
    return CanonicalDataset::load(path);
}

// ---------------------------------------------------------------- cooptimize

int cmd_cooptimize(const Cli& cli) {
    const RunConfig cfg = cli.config();
    RunStore store = cli.store();
    const std::string run_id = make_run_id("cooptimize", {{"config", to_json(cfg)}, {"seed", cli.seed}});
    if (store.exists(run_id)) {
        std::cout << run_id << "\n";
        return 0;
    }

    CoopPair pair = cooptimize(cfg.env, cfg.nn, cfg.rl, cfg.coop_iterations, cli.seed);
    const RolloutBatch canonical =
        rollout(cfg.env, pair.human, pair.robot, cfg.canonical_episodes, Rng::derive(cli.seed, 0xCA));
    const RolloutBatch eval =
        rollout(cfg.env, pair.human, pair.robot, cfg.eval_episodes, Rng::derive(cli.seed, 0xE1),
                /*stochastic=*/false);

    const fs::path staging = store.make_staging_dir(run_id);
    save_policy(staging / "human.ckpt", pair.human);
    save_policy(staging / "robot_coop.ckpt", pair.robot);
    save_mlp(staging / "human_critic.ckpt", pair.human_critic);
    save_mlp(staging / "robot_critic.ckpt", pair.robot_critic);
    save_trajectories(staging / "canonical.ndjson", canonical.trajs);
    write_metrics_csv(staging / "metrics.csv", pair.curves);

    RunRecord rec;
    rec.run_id = run_id;
    rec.kind = "cooptimize";
    rec.seed = cli.seed;
    rec.config = to_json(cfg);
    rec.status = "done";
    rec.summary = {{"eval_success", eval.success_rate},
                   {"eval_return", eval.mean_return},
                   {"canonical_mean_return", canonical.mean_return},
                   {"canonical_episodes", static_cast<int>(canonical.trajs.size())}};
    rec.artifacts = {{"human", "human.ckpt"},
                     {"robot_coop", "robot_coop.ckpt"},
                     {"human_critic", "human_critic.ckpt"},
                     {"robot_critic", "robot_critic.ckpt"},
                     {"canonical", "canonical.ndjson"},
                     {"metrics", "metrics.csv"}};
    store.persist(rec, staging);
    std::cout << run_id << "\n";
    std::cerr << "cooptimize done: eval success " << eval.success_rate << ", canonical return "
              << canonical.mean_return << "\n";
    return 0;
}

// ---------------------------------------------------------------- train-robot

int cmd_train_robot(const Cli& cli, const std::string& human_path, const std::string& expert_path,
                    const std::string& resume_path, const std::string& resume_critic_path) {
    const RunConfig cfg = cli.config();
    RunStore store = cli.store();
    GaussianPolicy human = load_policy_checked(human_path);

    std::optional<GaussianPolicy> expert;
    if (!expert_path.empty()) expert = load_policy_checked(expert_path);

    const std::string run_id = make_run_id(
        "train_robot", {{"config", to_json(cfg)},
                        {"seed", cli.seed},
                        {"human", hex16(fnv1a64_file(human_path))},
                        {"expert", expert_path.empty() ? "" : hex16(fnv1a64_file(expert_path))},
                        {"resume", resume_path.empty() ? "" : hex16(fnv1a64_file(resume_path))}});
    if (store.exists(run_id)) {
        std::cout << run_id << "\n";
        return 0;
    }

    RobotTrainResult result = [&] {
        if (!resume_path.empty()) {
            GaussianPolicy robot = load_policy_checked(resume_path);
            Mlp critic = resume_critic_path.empty()
                             ? [&] {
                                   Rng rng(Rng::derive(cli.seed, 13));
                                   return Mlp::make(robot.obs_dim(), cfg.nn.critic_hidden, 1, rng, 0.01);
                               }()
                             : load_mlp(resume_critic_path);
            Adam ar(AdamConfig{.lr = cfg.nn.policy_lr, .eps = cfg.nn.adam_eps});
            Adam arc(AdamConfig{.lr = cfg.nn.critic_lr, .eps = cfg.nn.adam_eps});
            PartnerProvider base = [&human](int, Rng&) -> const GaussianPolicy& { return human; };
            return train_robot_loop(cfg.env, base, std::move(robot), std::move(critic), ar, arc, cfg.nn,
                                    cfg.rl, cfg.robot_iterations, cli.seed,
                                    expert ? &*expert : nullptr);
        }
        return train_personalized(cfg.env, human, cfg.nn, cfg.rl, cfg.robot_iterations, cli.seed,
                                  expert ? &*expert : nullptr);
    }();

    const RolloutBatch eval = rollout(cfg.env, human, result.robot, cfg.eval_episodes,
                                      Rng::derive(cli.seed, 0xE1), /*stochastic=*/false);
    const RolloutBatch canonical =
        rollout(cfg.env, human, result.robot, cfg.canonical_episodes, Rng::derive(cli.seed, 0xCA));

    const fs::path staging = store.make_staging_dir(run_id);
    save_policy(staging / "robot.ckpt", result.robot);
    save_mlp(staging / "critic.ckpt", result.critic);
    save_trajectories(staging / "canonical.ndjson", canonical.trajs);
    write_metrics_csv(staging / "metrics.csv", result.curves);

    RunRecord rec;
    rec.run_id = run_id;
    rec.kind = "train_robot";
    rec.seed = cli.seed;
    rec.config = to_json(cfg);
    rec.status = "done";
    rec.summary = {{"eval_success", eval.success_rate},
                   {"eval_return", eval.mean_return},
                   {"canonical_mean_return", canonical.mean_return},
                   {"bc_expert", !expert_path.empty()}};
    rec.artifacts = {{"robot", "robot.ckpt"},
                     {"critic", "critic.ckpt"},
                     {"canonical", "canonical.ndjson"},
                     {"metrics", "metrics.csv"}};
    store.persist(rec, staging);
    std::cout << run_id << "\n";
    std::cerr << "train-robot done: eval success " << eval.success_rate << "\n";
    return 0;
}

// -------------------------------------------------------------------- attack

struct AttackInputs {
    GaussianPolicy robot;
    GaussianPolicy human;
    CanonicalDataset canonical;
    std::uint64_t robot_sum = 0;
    std::uint64_t canonical_sum = 0;
};

AttackInputs load_attack_inputs(const std::string& robot_path, const std::string& human_path,
                                const std::string& canonical_path) {
    AttackInputs in{load_policy_checked(robot_path), load_policy_checked(human_path),
                    load_canonical_checked(canonical_path), fnv1a64_file(robot_path),
                    fnv1a64_file(canonical_path)};
    return in;
}

// Runs one adversary training and persists it; reused by attack/scan/sanity.
AdversaryResult run_attack_persisted(RunStore& store, const RunConfig& cfg, const AttackInputs& in,
                                     double lambda, std::uint64_t seed,
                                     const std::optional<Normalization>& norm,
                                     const std::string& run_id, bool mmd_metric_override = false) {
    AdversaryConfig acfg = cfg.adversary_config(lambda, seed);
    if (mmd_metric_override) acfg.metric = MetricKind::mmd;
    const AdversaryResult result =
        train_adversary(cfg.env, in.robot, in.canonical, acfg, cfg.attack_nn(), &in.human, norm);

    const fs::path staging = store.make_staging_dir(run_id);
    save_policy(staging / "adversary.ckpt", result.policy);
    if (result.discriminator) save_discriminator(staging / "discriminator.ckpt", *result.discriminator);
    write_metrics_csv(staging / "metrics.csv", result.curves);
    const RolloutBatch eval =
        rollout(cfg.env, result.policy, in.robot, acfg.eval_episodes, Rng::derive(seed, 0xE7A1));
    save_trajectories(staging / "trajectories.ndjson", eval.trajs);

    RunRecord rec;
    rec.run_id = run_id;
    rec.kind = "attack";
    rec.seed = seed;
    rec.config = to_json(cfg);
    rec.config["attack"] = {{"lambda", lambda},
                            {"metric", metric_kind_name(acfg.metric)},
                            {"robot_checksum", hex16(in.robot_sum)},
                            {"canonical_checksum", hex16(in.canonical_sum)}};
    rec.status = "done";
    rec.summary = {{"naturalness", result.naturalness},
                   {"raw_return", result.raw_mean_robot_return},
                   {"adversarialness", result.normalized ? json(result.adversarialness) : json()},
                   {"eval_success", result.eval_success_rate},
                   {"canonical_accuracy", result.canonical_accuracy},
                   {"mode_collapse_warning", result.mode_collapse_warning}};
    rec.artifacts = {{"adversary", "adversary.ckpt"},
                     {"metrics", "metrics.csv"},
                     {"trajectories", "trajectories.ndjson"}};
    if (result.discriminator) rec.artifacts["discriminator"] = "discriminator.ckpt";
    store.persist(rec, staging);
    return result;
}

int cmd_attack(const Cli& cli, const std::string& robot_path, const std::string& human_path,
               const std::string& canonical_path, double lambda, const std::string& metric,
               double norm_lo, double norm_hi) {
    RunConfig cfg = cli.config();
    if (!metric.empty()) cfg.metric = metric_kind_from_name(metric);
    RunStore store = cli.store();
    const AttackInputs in = load_attack_inputs(robot_path, human_path, canonical_path);

    std::optional<Normalization> norm;
    if (norm_hi > norm_lo && (norm_lo != 0.0 || norm_hi != 0.0)) norm = Normalization{norm_lo, norm_hi};

    const std::string run_id = make_run_id("attack", {{"config", to_json(cfg)},
                                                      {"lambda", lambda},
                                                      {"seed", cli.seed},
                                                      {"robot", hex16(in.robot_sum)},
                                                      {"canonical", hex16(in.canonical_sum)}});
    if (!store.exists(run_id)) {
        const AdversaryResult r = run_attack_persisted(store, cfg, in, lambda, cli.seed, norm, run_id);
        std::cerr << "attack done: naturalness " << r.naturalness << ", raw return "
                  << r.raw_mean_robot_return << "\n";
    }
    std::cout << run_id << "\n";
    return 0;
}

// ---------------------------------------------------------------------- scan

json scan_state_to_json(const ScanState& st, const ScanConfig& sc) {
    json runs = json::array();
    for (const auto& r : st.runs) {
        runs.push_back({{"run_id", r.run_id},
                        {"seed", r.seed},
                        {"round", r.round},
                        {"index", r.index},
                        {"lambda", r.lambda},
                        {"status", r.status},
                        {"naturalness", r.naturalness},
                        {"adversarialness", r.adversarialness},
                        {"raw_return", r.raw_return},
                        {"error", r.error}});
    }
    json bounds = json::object();
    for (const auto& [seed, history] : st.bounds_history) {
        json h = json::array();
        for (const auto& b : history) h.push_back({b.first, b.second});
        bounds[std::to_string(seed)] = h;
    }
    return {{"scan",
             {{"lambda_min", sc.lambda_min},
              {"lambda_max", sc.lambda_max},
              {"rounds", sc.rounds},
              {"samples_per_round", sc.samples_per_round},
              {"seeds", sc.seeds},
              {"window", sc.window}}},
            {"norm", {{"lo", st.norm.lo}, {"hi", st.norm.hi}}},
            {"bounds_history", bounds},
            {"runs", runs}};
}

ScanState scan_state_from_json(const json& j) {
    ScanState st;
    st.norm.lo = j.at("norm").at("lo").get<double>();
    st.norm.hi = j.at("norm").at("hi").get<double>();
    st.norm_valid = true;
    for (const auto& r : j.at("runs")) {
        ScanRun run;
        run.run_id = r.at("run_id").get<std::string>();
        run.seed = r.at("seed").get<std::uint64_t>();
        run.round = r.at("round").get<int>();
        run.index = r.at("index").get<int>();
        run.lambda = r.at("lambda").get<double>();
        run.status = r.at("status").get<std::string>();
        run.naturalness = r.at("naturalness").get<double>();
        run.adversarialness = r.at("adversarialness").get<double>();
        run.raw_return = r.at("raw_return").get<double>();
        run.error = r.value("error", "");
        st.runs.push_back(std::move(run));
    }
    if (j.contains("bounds_history"))
        for (const auto& [seed, h] : j.at("bounds_history").items()) {
            std::vector<std::pair<double, double>> history;
            for (const auto& b : h) history.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
            st.bounds_history[std::stoull(seed)] = std::move(history);
        }
    return st;
}

Frontier frontier_from_scan(const ScanState& st) {
    std::vector<FrontierPoint> pts = scan_frontier_points(st);
    std::vector<double> returns;
    returns.reserve(pts.size());
    for (const auto& r : st.runs)
        if (r.status == "done") returns.push_back(r.raw_return);
    return build_frontier(std::move(pts), returns, st.norm);
}

json frontier_to_json(const Frontier& f) {
    json pts = json::array();
    for (const auto& p : f.all_points)
        pts.push_back({{"run_id", p.run_id},
                       {"lambda", p.lambda},
                       {"seed", p.seed},
                       {"naturalness", p.naturalness},
                       {"adversarialness", p.adversarialness},
                       {"pareto", is_pareto_member(f, p)}});
    return {{"auc", f.auc}, {"norm", {{"lo", f.norm.lo}, {"hi", f.norm.hi}}}, {"points", pts}};
}

void write_frontier_files(const fs::path& dir, const Frontier& f) {
    write_text(dir / "frontier.csv", frontier_csv(f));
    write_text(dir / "frontier.json", frontier_to_json(f).dump(2) + "\n");
    write_text(dir / "frontier.svg", frontier_svg(f));
}

int cmd_scan(const Cli& cli, const std::string& robot_path, const std::string& human_path,
             const std::string& canonical_path, double lambda_min, double lambda_max, int rounds,
             int samples, const std::string& seeds_csv, const std::string& metric,
             const std::string& resume_id, const std::string& norm_from, int max_runs) {
    RunConfig cfg = cli.config();
    if (!metric.empty()) cfg.metric = metric_kind_from_name(metric);
    if (lambda_min > 0.0) cfg.scan.lambda_min = lambda_min;
    if (lambda_max > 0.0) cfg.scan.lambda_max = lambda_max;
    if (rounds > 0) cfg.scan.rounds = rounds;
    if (samples > 0) cfg.scan.samples_per_round = samples;
    if (!seeds_csv.empty()) {
        cfg.scan.seeds.clear();
        std::stringstream ss(seeds_csv);
        std::string part;
        while (std::getline(ss, part, ','))
            if (!part.empty()) cfg.scan.seeds.push_back(std::stoull(part));
    }
    cfg.scan.validate();

    RunStore store = cli.store();
    if (!resume_id.empty() && !store.exists(resume_id))
        throw NotFoundError("scan to resume not found: " + resume_id);

    const AttackInputs in = load_attack_inputs(robot_path, human_path, canonical_path);
    const std::string scan_id = make_run_id("scan", {{"config", to_json(cfg)},
                                                     {"robot", hex16(in.robot_sum)},
                                                     {"canonical", hex16(in.canonical_sum)}});
    if (!resume_id.empty() && resume_id != scan_id)
        throw ConfigError("resume id does not match this scan configuration: expected " + scan_id);
    if (store.exists(scan_id)) {
        std::cout << scan_id << "\n";
        return 0;
    }

    std::optional<Normalization> norm_override;
    if (!norm_from.empty()) {
        const RunRecord src = store.load_record(norm_from);
        norm_override = Normalization{src.summary.at("norm_lo").get<double>(),
                                      src.summary.at("norm_hi").get<double>()};
    }

    std::atomic<int> budget{max_runs > 0 ? max_runs : std::numeric_limits<int>::max()};
    std::mutex io_mu;

    AdversaryRunner runner = [&](double lambda, std::uint64_t seed, int round, int index) {
        const std::string child_id =
            make_run_id("attack", {{"config", to_json(cfg)},
                                   {"lambda", lambda},
                                   {"scan_seed", seed},
                                   {"round", round},
                                   {"index", index},
                                   {"robot", hex16(in.robot_sum)},
                                   {"canonical", hex16(in.canonical_sum)}});
        ScanRunOutcome out;
        out.run_id = child_id;
        if (store.exists(child_id)) {
            const RunRecord rec = store.load_record(child_id);
            if (rec.status == "done") {
                out.ok = true;
                out.naturalness = rec.summary.at("naturalness").get<double>();
                out.raw_return = rec.summary.at("raw_return").get<double>();
            } else {
                out.ok = false;
                out.error = rec.summary.value("error", "recorded failure");
            }
            return out;
        }
        if (budget.fetch_sub(1) <= 0) throw ScanInterrupt("scan interrupted by --max-runs");
        const std::uint64_t run_seed = Rng::derive(Rng::derive(seed, 0x5CA0 + round), index);
        const AdversaryResult r =
            run_attack_persisted(store, cfg, in, lambda, run_seed, std::nullopt, child_id);
        out.ok = true;
        out.naturalness = r.naturalness;
        out.raw_return = r.raw_mean_robot_return;
        return out;
    };

    ScanProgress progress = [&](const ScanRun& r) {
        std::lock_guard<std::mutex> lock(io_mu);
        std::fprintf(stderr, "scan run: lambda=%g seed=%llu nat=%.4f adv=%.4f [%s]\n", r.lambda,
                     static_cast<unsigned long long>(r.seed), r.naturalness, r.adversarialness,
                     r.status.c_str());
    };

    const ScanState st =
        rigid_scan(cfg.scan, runner, in.canonical.mean_return, cli.jobs, norm_override, progress);

    const fs::path staging = store.make_staging_dir(scan_id);
    write_text(staging / "scan.json", scan_state_to_json(st, cfg.scan).dump(2) + "\n");
    const Frontier f = frontier_from_scan(st);
    write_frontier_files(staging, f);

    RunRecord rec;
    rec.run_id = scan_id;
    rec.kind = "scan";
    rec.seed = cfg.scan.seeds.front();
    rec.config = to_json(cfg);
    rec.status = "done";
    int failed = 0;
    for (const auto& r : st.runs)
        if (r.status == "failed") ++failed;
    rec.summary = {{"runs", static_cast<int>(st.runs.size())},
                   {"failed", failed},
                   {"auc", f.auc},
                   {"norm_lo", st.norm.lo},
                   {"norm_hi", st.norm.hi}};
    rec.artifacts = {{"scan", "scan.json"},
                     {"frontier_csv", "frontier.csv"},
                     {"frontier_json", "frontier.json"},
                     {"frontier_svg", "frontier.svg"}};
    store.persist(rec, staging);
    std::cout << scan_id << "\n";
    return 0;
}

// ----------------------------------------------------- frontier / auc / export

Frontier load_scan_frontier(RunStore& store, const std::string& scan_id,
                            const std::optional<Normalization>& renorm = std::nullopt) {
    const RunRecord rec = store.load(scan_id);
    if (rec.kind != "scan") throw ConfigError("run " + scan_id + " is not a scan");
    std::ifstream in(store.artifact_path(rec, "scan"));
    json j;
    in >> j;
    ScanState st = scan_state_from_json(j);
    if (renorm) {
        st.norm = *renorm;
        for (auto& r : st.runs)
            if (r.status == "done")
                r.adversarialness = normalize_adversarialness(r.raw_return, st.norm.lo, st.norm.hi);
    }
    return frontier_from_scan(st);
}

int cmd_frontier(const Cli& cli, const std::string& scan_id, const std::string& norm_from) {
    RunStore store = cli.store();
    std::optional<Normalization> renorm;
    if (!norm_from.empty()) {
        const RunRecord src = store.load_record(norm_from);
        renorm = Normalization{src.summary.at("norm_lo").get<double>(),
                               src.summary.at("norm_hi").get<double>()};
    }
    const Frontier f = load_scan_frontier(store, scan_id, renorm);
    write_frontier_files(store.run_dir(scan_id), f);
    std::printf("%.10g\n", f.auc);
    return 0;
}

int cmd_auc(const Cli& cli, const std::string& scan_id) {
    RunStore store = cli.store();
    const Frontier f = load_scan_frontier(store, scan_id);
    std::printf("%.10g\n", f.auc);
    return 0;
}

int cmd_export(const Cli& cli, const std::string& scan_id, const std::string& dest) {
    RunStore store = cli.store();
    const Frontier f = load_scan_frontier(store, scan_id);
    const fs::path dir = dest.empty() ? fs::path(".") : fs::path(dest);
    fs::create_directories(dir);
    write_frontier_files(dir, f);
    std::cout << (dir / "frontier.csv").string() << "\n"
              << (dir / "frontier.json").string() << "\n"
              << (dir / "frontier.svg").string() << "\n";
    return 0;
}

// ----------------------------------------------------------------- robust-ft

int cmd_robust_ft(const Cli& cli, const std::string& robot_path, const std::string& critic_path,
                  const std::string& human_path, const std::string& frontier_path, double rate,
                  int top_n) {
    const RunConfig cfg = cli.config();
    RunStore store = cli.store();
    GaussianPolicy robot = load_policy_checked(robot_path);
    GaussianPolicy human = load_policy_checked(human_path);
    Mlp critic = critic_path.empty() ? [&] {
        Rng rng(Rng::derive(cli.seed, 13));
        return Mlp::make(robot.obs_dim(), cfg.nn.critic_hidden, 1, rng, 0.01);
    }() : load_mlp(critic_path);

    if (!fs::exists(frontier_path)) throw NotFoundError("frontier file not found: " + frontier_path);
    json fj;
    {
        std::ifstream in(frontier_path);
        in >> fj;
    }
    std::vector<FrontierPoint> pts;
    for (const auto& p : fj.at("points")) {
        FrontierPoint fp;
        fp.run_id = p.at("run_id").get<std::string>();
        fp.lambda = p.at("lambda").get<double>();
        fp.seed = p.value("seed", static_cast<std::uint64_t>(0));
        fp.naturalness = p.at("naturalness").get<double>();
        fp.adversarialness = p.at("adversarialness").get<double>();
        pts.push_back(std::move(fp));
    }
    const double use_rate = rate >= 0.0 ? rate : cfg.frontier.adversary_rate;
    const int use_n = top_n > 0 ? top_n : cfg.frontier.top_n;
    const auto selected =
        select_failure_cases(pts, {cfg.frontier.nat_lo, cfg.frontier.nat_hi}, use_n);
    if (selected.empty())
        std::cerr << "warning: no frontier run inside the naturalness window; fine-tuning degenerates "
                     "to continued training\n";

    std::vector<GaussianPolicy> adversaries;
    for (const auto& p : selected) {
        const RunRecord rec = store.load(p.run_id);
        adversaries.push_back(load_policy(store.artifact_path(rec, "adversary")));
        std::cerr << "failure case: " << p.run_id << " lambda=" << p.lambda << " nat=" << p.naturalness
                  << " adv=" << p.adversarialness << "\n";
    }

    const std::string run_id = make_run_id(
        "robust_ft", {{"config", to_json(cfg)},
                      {"seed", cli.seed},
                      {"rate", use_rate},
                      {"robot", hex16(fnv1a64_file(robot_path))},
                      {"adversaries", [&] {
                           json ids = json::array();
                           for (const auto& p : selected) ids.push_back(p.run_id);
                           return ids;
                       }()}});
    if (store.exists(run_id)) {
        std::cout << run_id << "\n";
        return 0;
    }

    PopulationSpec pop;
    pop.base_human = &human;
    for (const auto& a : adversaries) pop.adversaries.push_back(&a);
    pop.adversary_rate = adversaries.empty() ? 0.0 : use_rate;

    const RobotTrainResult result = robust_finetune(cfg.env, pop, robot, critic, cfg.nn, cfg.rl,
                                                    cfg.finetune_iterations, cli.seed);
    const RolloutBatch eval = rollout(cfg.env, human, result.robot, cfg.eval_episodes,
                                      Rng::derive(cli.seed, 0xE1), /*stochastic=*/false);

    const fs::path staging = store.make_staging_dir(run_id);
    save_policy(staging / "robot.ckpt", result.robot);
    save_mlp(staging / "critic.ckpt", result.critic);
    write_metrics_csv(staging / "metrics.csv", result.curves);

    RunRecord rec;
    rec.run_id = run_id;
    rec.kind = "robust_ft";
    rec.seed = cli.seed;
    rec.config = to_json(cfg);
    rec.status = "done";
    rec.summary = {{"eval_success", eval.success_rate},
                   {"eval_return", eval.mean_return},
                   {"adversary_rate", pop.adversary_rate},
                   {"adversaries", static_cast<int>(adversaries.size())}};
    rec.artifacts = {{"robot", "robot.ckpt"}, {"critic", "critic.ckpt"}, {"metrics", "metrics.csv"}};
    store.persist(rec, staging);
    std::cout << run_id << "\n";
    std::cerr << "robust-ft done: base-human success " << eval.success_rate << "\n";
    return 0;
}

// ---------------------------------------------------------------- probe-disc

int cmd_probe_disc(const Cli& cli, const std::string& disc_path, const std::string& canonical_path,
                   const std::string& levels_csv) {
    const RunConfig cfg = cli.config();
    if (!fs::exists(disc_path)) throw NotFoundError("discriminator checkpoint not found: " + disc_path);
    const CanonicalDataset canonical = load_canonical_checked(canonical_path);
    const Discriminator disc = load_discriminator(disc_path, cfg.gan);

    std::vector<double> levels;
    std::stringstream ss(levels_csv);
    std::string part;
    while (std::getline(ss, part, ','))
        if (!part.empty()) levels.push_back(std::stod(part));

    const auto curve = probe_discriminator(disc, canonical, levels, cli.seed);
    std::printf("noise_level,accuracy\n");
    for (std::size_t i = 0; i < curve.size(); ++i) std::printf("%.17g,%.17g\n", levels[i], curve[i]);
    return 0;
}

// -------------------------------------------------------------------- sanity

int cmd_sanity(const Cli& cli, const std::string& robot_path, const std::string& human_path,
               const std::string& canonical_path) {
    const RunConfig cfg = cli.config();
    RunStore store = cli.store();
    const AttackInputs in = load_attack_inputs(robot_path, human_path, canonical_path);

    auto attack_id = [&](double lambda, std::uint64_t seed) {
        return make_run_id("attack", {{"config", to_json(cfg)},
                                      {"lambda", lambda},
                                      {"seed", seed},
                                      {"robot", hex16(in.robot_sum)},
                                      {"canonical", hex16(in.canonical_sum)},
                                      {"sanity", true}});
    };
    auto run_or_load = [&](double lambda, std::uint64_t seed) {
        const std::string id = attack_id(lambda, seed);
        if (store.exists(id)) {
            const RunRecord rec = store.load_record(id);
            AdversaryResult r;
            r.naturalness = rec.summary.at("naturalness").get<double>();
            r.raw_mean_robot_return = rec.summary.at("raw_return").get<double>();
            return std::pair<AdversaryResult, std::string>(std::move(r), id);
        }
        return std::pair<AdversaryResult, std::string>(
            run_attack_persisted(store, cfg, in, lambda, seed, std::nullopt, id), id);
    };

    // Endpoint 1: a purely adversarial partner must be learnable. Its return
    // calibrates the adversarialness ceiling for this robot checkpoint.
    const auto [lo_run, lo_id] = run_or_load(cfg.scan.lambda_min, Rng::derive(cli.seed, 0xCA10));
    const Normalization norm{-in.canonical.mean_return, -lo_run.raw_mean_robot_return};
    const double adv_floor =
        norm.hi > norm.lo
            ? normalize_adversarialness(lo_run.raw_mean_robot_return, norm.lo, norm.hi)
            : 0.0;

    // Endpoint 2: a natural partner must be learnable at lambda_max.
    const auto [hi_run, hi_id] = run_or_load(cfg.scan.lambda_max, Rng::derive(cli.seed, 0xCA11));
    const double base = in.canonical.mean_return;
    const double ret_gap = std::fabs(hi_run.raw_mean_robot_return - base);
    const bool check_low = adv_floor >= 0.9;
    const bool check_high = hi_run.naturalness >= 0.8 && ret_gap <= 0.2 * std::fabs(base);

    std::printf("sanity lambda=%g: raw_return=%.2f adversarialness=%.3f -> %s\n", cfg.scan.lambda_min,
                lo_run.raw_mean_robot_return, adv_floor, check_low ? "pass" : "FAIL");
    std::printf("sanity lambda=%g: naturalness=%.3f raw_return=%.2f (baseline %.2f, within 20%%: %s) -> %s\n",
                cfg.scan.lambda_max, hi_run.naturalness, hi_run.raw_mean_robot_return, base,
                ret_gap <= 0.2 * std::fabs(base) ? "yes" : "no", check_high ? "pass" : "FAIL");

    const std::string run_id =
        make_run_id("sanity", {{"config", to_json(cfg)},
                               {"seed", cli.seed},
                               {"robot", hex16(in.robot_sum)},
                               {"canonical", hex16(in.canonical_sum)}});
    if (!store.exists(run_id)) {
        const fs::path staging = store.make_staging_dir(run_id);
        json report = {{"lambda_min", cfg.scan.lambda_min},
                       {"lambda_max", cfg.scan.lambda_max},
                       {"adversarial_run", lo_id},
                       {"natural_run", hi_id},
                       {"adversarialness", adv_floor},
                       {"naturalness", hi_run.naturalness},
                       {"pass_low", check_low},
                       {"pass_high", check_high}};
        write_text(staging / "report.json", report.dump(2) + "\n");
        RunRecord rec;
        rec.run_id = run_id;
        rec.kind = "scan"; // sanity is a two-point endpoint scan
        rec.seed = cli.seed;
        rec.config = to_json(cfg);
        rec.status = "done";
        rec.summary = {{"norm_lo", norm.lo},
                       {"norm_hi", norm.hi},
                       {"pass_low", check_low},
                       {"pass_high", check_high}};
        rec.artifacts = {{"report", "report.json"}};
        store.persist(rec, staging);
    }
    std::cout << run_id << "\n";
    return check_low && check_high ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"natural-adversarial robustness toolkit for cooperative policies"};
    app.require_subcommand(1);

    Cli cli;
    app.add_option("--config", cli.config_path, "run configuration file (JSON)");
    app.add_option("--out", cli.out_dir, "output/run-store directory");
    app.add_option("--seed", cli.seed, "base seed");
    app.add_option("--jobs", cli.jobs, "parallel workers for scan rounds");

    auto* coop = app.add_subcommand("cooptimize", "jointly train the synthetic human and robot");

    std::string human_path, expert_path, resume_path, resume_critic, robot_path, canonical_path;
    std::string critic_path, frontier_path, disc_path, levels = "0,1,2,4,8,16";
    std::string metric, seeds_csv, resume_id, norm_from, scan_id, dest;
    double lambda = 0.0, norm_lo = 0.0, norm_hi = 0.0, rate = -1.0;
    double lambda_min = 0.0, lambda_max = 0.0;
    int rounds = 0, samples = 0, top_n = 0, max_runs = 0;

    auto* tr = app.add_subcommand("train-robot", "train a personalized robot against a frozen human");
    tr->add_option("--human", human_path, "synthetic human checkpoint")->required();
    tr->add_option("--expert", expert_path, "expert robot checkpoint for the BC term");
    tr->add_option("--resume", resume_path, "robot checkpoint to continue from");
    tr->add_option("--resume-critic", resume_critic, "critic checkpoint to continue from");

    auto* atk = app.add_subcommand("attack", "train one natural-adversarial partner");
    atk->add_option("--robot", robot_path, "frozen robot checkpoint")->required();
    atk->add_option("--human", human_path, "synthetic human checkpoint (adversary init)")->required();
    atk->add_option("--canonical", canonical_path, "canonical trajectory dataset")->required();
    atk->add_option("--lambda", lambda, "naturalness weight")->required();
    atk->add_option("--metric", metric, "ls_gan | kl_logistic | mmd");
    atk->add_option("--norm-lo", norm_lo, "adversarialness normalization floor");
    atk->add_option("--norm-hi", norm_hi, "adversarialness normalization ceiling");

    auto* scan = app.add_subcommand("scan", "RIGID lambda scan");
    scan->add_option("--robot", robot_path)->required();
    scan->add_option("--human", human_path)->required();
    scan->add_option("--canonical", canonical_path)->required();
    scan->add_option("--lambda-min", lambda_min);
    scan->add_option("--lambda-max", lambda_max);
    scan->add_option("--rounds", rounds);
    scan->add_option("--samples", samples);
    scan->add_option("--seeds", seeds_csv, "comma-separated scan seeds");
    scan->add_option("--metric", metric);
    scan->add_option("--resume", resume_id, "finished-run cache is reused; pass the scan id");
    scan->add_option("--norm-from", norm_from, "reuse normalization from another scan/sanity run");
    scan->add_option("--max-runs", max_runs, "abort after this many fresh runs (testing aid)");

    auto* fr = app.add_subcommand("frontier", "build frontier files for a scan");
    fr->add_option("--scan", scan_id)->required();
    fr->add_option("--norm-from", norm_from, "renormalize against another run's calibration");

    auto* auc = app.add_subcommand("auc", "print the frontier AUC of a scan");
    auc->add_option("--scan", scan_id)->required();

    auto* exp = app.add_subcommand("export", "write frontier files to a directory");
    exp->add_option("--scan", scan_id)->required();
    exp->add_option("--dest", dest);

    auto* rft = app.add_subcommand("robust-ft", "fine-tune the robot against frontier failure cases");
    rft->add_option("--robot", robot_path)->required();
    rft->add_option("--critic", critic_path);
    rft->add_option("--human", human_path)->required();
    rft->add_option("--frontier", frontier_path, "frontier.json from a scan")->required();
    rft->add_option("--rate", rate, "adversary sampling rate");
    rft->add_option("--n", top_n, "number of failure cases");

    auto* probe = app.add_subcommand("probe-disc", "discriminator accuracy under increasing noise");
    probe->add_option("--disc", disc_path)->required();
    probe->add_option("--canonical", canonical_path)->required();
    probe->add_option("--levels", levels, "comma-separated noise multipliers");

    auto* sane = app.add_subcommand("sanity", "check both lambda endpoints for a robot");
    sane->add_option("--robot", robot_path)->required();
    sane->add_option("--human", human_path)->required();
    sane->add_option("--canonical", canonical_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (coop->parsed()) return cmd_cooptimize(cli);
        if (tr->parsed()) return cmd_train_robot(cli, human_path, expert_path, resume_path, resume_critic);
        if (atk->parsed())
            return cmd_attack(cli, robot_path, human_path, canonical_path, lambda, metric, norm_lo, norm_hi);
        if (scan->parsed())
            return cmd_scan(cli, robot_path, human_path, canonical_path, lambda_min, lambda_max, rounds,
                            samples, seeds_csv, metric, resume_id, norm_from, max_runs);
        if (fr->parsed()) return cmd_frontier(cli, scan_id, norm_from);
        if (auc->parsed()) return cmd_auc(cli, scan_id);
        if (exp->parsed()) return cmd_export(cli, scan_id, dest);
        if (rft->parsed())
            return cmd_robust_ft(cli, robot_path, critic_path, human_path, frontier_path, rate, top_n);
        if (probe->parsed()) return cmd_probe_disc(cli, disc_path, canonical_path, levels);
        if (sane->parsed()) return cmd_sanity(cli, robot_path, human_path, canonical_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NotFoundError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ScanInterrupt& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
