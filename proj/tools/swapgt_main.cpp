#include "swapgt/cache.hpp"
#include "swapgt/config.hpp"
#include "swapgt/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace swapgt;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheck = 3;

/// Thrown by selftest/ablate verification failures; maps to exit code 3.
struct CheckFailure : std::exception {
    std::string msg;
    explicit CheckFailure(std::string m) : msg(std::move(m)) {}
    const char* what() const noexcept override { return msg.c_str(); }
};

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("-c,--config", args.config_path, "key=value config file");
    if (config_required) opt->required();
    cmd->add_option("-o,--out", args.out_dir, "output directory");
    cmd->add_option("--set", args.overrides, "config override key=value (repeatable)");
}

TrainConfig load_config(const CommonArgs& args) {
    if (args.config_path.empty()) return parse_config_text("", args.overrides);
    return parse_config_file(args.config_path, args.overrides);
}

Graph dataset_graph(const TrainConfig& cfg) {
    if (cfg.uses_files()) {
        if (cfg.edge_path.empty() || cfg.label_path.empty())
            throw std::runtime_error("dataset: features, edges and labels must all be set");
        return load_graph(cfg.feature_path, cfg.edge_path, cfg.label_path);
    }
    return generate_sbm(cfg.sbm, cfg.base_seed);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

ModelConfig model_config_for(const TrainConfig& cfg, const Graph& g) {
    return {g.d,       cfg.hidden_dim, cfg.ffn_dim, cfg.layers,
            cfg.heads, g.c,            cfg.dropout, cfg.share_encoder};
}

json run_record(const TrainConfig& cfg, const RunResult& result, std::size_t r) {
    json rec;
    rec["dataset"] = cfg.dataset;
    rec["run"] = r;
    rec["split_seed"] = cfg.base_seed + r;
    rec["init_seed"] = cfg.base_seed + 10000 + r;
    rec["test_acc"] = result.test_accs[r];
    rec["best_val_acc"] = result.val_accs[r];
    rec["epochs"] = result.epochs[r];
    json curve = json::array();
    for (const auto& e : result.curves[r]) {
        curve.push_back({{"epoch", e.epoch},
                         {"ce", e.ce},
                         {"ca", e.ca},
                         {"total", e.total},
                         {"val_acc", e.val_acc}});
    }
    rec["curve"] = std::move(curve);
    rec["config"] = render_config(cfg);
    return rec;
}

void write_run_records(const fs::path& dir, const TrainConfig& cfg, const RunResult& result) {
    for (std::size_t r = 0; r < result.test_accs.size(); ++r)
        write_text(dir / ("run_" + std::to_string(r) + ".json"), run_record(cfg, result, r).dump(2) + "\n");
}

void print_summary(const TrainConfig& cfg, const RunResult& result) {
    std::printf("%s [%s/%s] runs=%zu  mean test acc %.4f +- %.4f\n", cfg.dataset.c_str(),
                variant_name(cfg.variant), split_name(cfg.split), result.test_accs.size(),
                result.mean_acc, result.std_acc);
    for (std::size_t r = 0; r < result.test_accs.size(); ++r)
        std::printf("  run %zu: test %.4f (val %.4f, %zu epochs)\n", r, result.test_accs[r],
                    result.val_accs[r], result.epochs[r]);
}

/// Loads prepared tables through the cache; builds and stores them on a miss.
std::pair<TokenTable, TokenTable> cached_tables(const TrainConfig& cfg, const Graph& g,
                                                const fs::path& out_dir, bool announce) {
    const fs::path cache_path = out_dir / "cache.swgt";
    const CacheHeader header = make_cache_header(g, cfg, cfg.base_seed);
    PreparedData data;
    if (load_prepared(cache_path.string(), header, data)) {
        if (announce) std::printf("prepare: cache hit (%s)\n", cache_path.string().c_str());
        return {std::move(data.attr_table), std::move(data.topo_table)};
    }
    if (fs::exists(cache_path))
        std::fprintf(stderr, "warning: %s: header mismatch, regenerating\n",
                     cache_path.string().c_str());
    const NormalizedAdjacency adj = normalized_adjacency(g);
    data = prepare_data(g, adj, cfg, cfg.base_seed);
    save_prepared(cache_path.string(), header, data);
    if (announce)
        std::printf("prepare: wrote %s (n=%zu d=%zu k=%zu s=%zu)\n", cache_path.string().c_str(),
                    g.n, g.d, data.attr_table.k, data.attr_seq.s);
    return {std::move(data.attr_table), std::move(data.topo_table)};
}

int cmd_prepare(const CommonArgs& args) {
    TrainConfig cfg = load_config(args);
    cfg.validate();
    Graph g = dataset_graph(cfg);
    fs::create_directories(args.out_dir);
    cached_tables(cfg, g, args.out_dir, true);
    std::printf("dataset %s: n=%zu d=%zu c=%zu edges=%zu homophily=%.3f\n", cfg.dataset.c_str(),
                g.n, g.d, g.c, g.edge_count(), edge_homophily(g));
    return 0;
}

int cmd_train(const CommonArgs& args) {
    TrainConfig cfg = load_config(args);
    cfg.validate();
    Graph g = dataset_graph(cfg);
    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);

    auto tables = cached_tables(cfg, g, dir, false);
    RunResult result = run_experiment(cfg, g, &tables);

    write_text(dir / "config.txt", render_config(cfg));
    write_text(dir / "results.csv", result_csv_header() + "\n" + result_csv_row(cfg, result) + "\n");
    write_run_records(dir, cfg, result);

    Model model(model_config_for(cfg, g));
    model.init_params(cfg.base_seed + 10000 + result.best_run);
    model.params().restore_values(result.best_params);
    save_checkpoint((dir / "model.swgp").string(), render_config(cfg),
                    cfg.base_seed + result.best_run, cfg.base_seed + 10000 + result.best_run,
                    model.params());

    print_summary(cfg, result);
    std::printf("wrote %s\n", (dir / "results.csv").string().c_str());
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& model_path, const std::string& role_name) {
    Checkpoint ck = load_checkpoint(model_path);
    TrainConfig cfg = args.config_path.empty()
                          ? parse_config_text(ck.config_text, args.overrides)
                          : parse_config_file(args.config_path, args.overrides);
    cfg.validate();
    Graph g = dataset_graph(cfg);

    Model model(model_config_for(cfg, g));
    model.init_params(ck.init_seed);
    if (ck.params.size() != model.params().names().size())
        throw std::runtime_error("checkpoint does not match the configured model");
    for (const auto& [name, tensor] : ck.params) {
        if (!model.params().has(name))
            throw std::runtime_error("checkpoint parameter " + name + " is unknown");
        Var p = model.params().at(name);
        if (!p->value.same_shape(tensor))
            throw std::runtime_error("checkpoint parameter " + name + " has the wrong shape");
        p->value = tensor;
    }

    Role role = Role::test;
    if (role_name == "train") role = Role::train;
    else if (role_name == "validation") role = Role::validation;
    else if (role_name != "test") throw std::invalid_argument("unknown role " + role_name);

    const NormalizedAdjacency adj = normalized_adjacency(g);
    PreparedData data = prepare_data(g, adj, cfg, ck.init_seed);
    SplitAssignment split = make_split(g, cfg.split, ck.split_seed);
    const double acc = evaluate(model, Model::features_leaf(g), data, cfg.alpha, g, split, role);

    fs::create_directories(args.out_dir);
    json rec;
    rec["dataset"] = cfg.dataset;
    rec["role"] = role_name;
    rec["accuracy"] = acc;
    rec["split_seed"] = ck.split_seed;
    rec["config"] = render_config(cfg);
    write_text(fs::path(args.out_dir) / "eval.json", rec.dump(2) + "\n");
    std::printf("%s accuracy on %s split: %.4f\n", cfg.dataset.c_str(), role_name.c_str(), acc);
    return 0;
}

int cmd_ablate(const CommonArgs& args) {
    TrainConfig base = load_config(args);
    base.validate();
    Graph g = dataset_graph(base);
    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);

    const Variant variants[] = {Variant::full, Variant::no_cal, Variant::large_k,
                                Variant::random_subsample};
    std::string csv = result_csv_header() + "\n";
    std::vector<std::pair<std::string, double>> ordering;

    for (Variant v : variants) {
        TrainConfig cfg = base;
        cfg.variant = v;
        RunResult result = run_experiment(cfg, g);
        csv += result_csv_row(cfg, result) + "\n";
        ordering.emplace_back(variant_name(v), result.mean_acc);

        if (v == Variant::no_cal) {
            for (const auto& curve : result.curves)
                for (const auto& rec : curve)
                    if (rec.ca != 0.0)
                        throw CheckFailure("ablate: no-cal produced a nonzero alignment term");
            std::printf("ablate: no-cal alignment term identically zero\n");
        }
        if (v == Variant::random_subsample) {
            const NormalizedAdjacency adj = normalized_adjacency(g);
            auto tables = build_tables(g, adj, cfg);
            PreparedData data = prepare_data_with_tables(tables.first, tables.second, g, cfg,
                                                         cfg.base_seed + 10000);
            for (std::size_t i = 0; i < g.n; ++i)
                for (std::size_t r = 0; r < data.attr_seq.rows_per_node(); ++r)
                    for (std::size_t pos = 1; pos < data.attr_seq.seq_len(); ++pos) {
                        const std::int32_t id = data.attr_seq.id_at(i, r, pos);
                        const std::int32_t* pool = data.attr_table.row(i);
                        if (std::find(pool, pool + data.attr_table.k, id) ==
                            pool + data.attr_table.k)
                            throw CheckFailure("ablate: subsample token outside the 2k pool");
                    }
            std::printf("ablate: random-subsample rows verified inside the 2k pool\n");
        }
    }

    write_text(dir / "ablate.csv", csv);
    std::sort(ordering.begin(), ordering.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    std::printf("ablate ordering (mean test acc, best first):\n");
    for (const auto& [name, acc] : ordering) std::printf("  %-18s %.4f\n", name.c_str(), acc);
    write_text(dir / "config.txt", render_config(base));
    std::printf("wrote %s\n", (dir / "ablate.csv").string().c_str());
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& param, std::string values_csv,
              std::size_t jobs) {
    TrainConfig base = load_config(args);
    base.validate();
    if (param != "t" && param != "s")
        throw std::invalid_argument("sweep: --param must be t or s");
    if (values_csv.empty()) values_csv = param == "t" ? "1,2,3,4" : "1,2,3,4,5,6,7,8";

    std::vector<std::size_t> values;
    {
        std::stringstream ss(values_csv);
        std::string field;
        while (std::getline(ss, field, ',')) values.push_back(std::stoul(field));
    }
    if (values.empty()) throw std::invalid_argument("sweep: empty value list");

    Graph g = dataset_graph(base);
    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);

    // tables depend on neither t nor s; build once and share across workers
    const NormalizedAdjacency adj = normalized_adjacency(g);
    const auto tables = build_tables(g, adj, base);

    std::vector<TrainConfig> cfgs;
    for (std::size_t v : values) {
        TrainConfig cfg = base;
        if (param == "t") cfg.swap_t = v;
        else cfg.aug_s = v;
        cfgs.push_back(cfg);
    }

    std::vector<RunResult> results(cfgs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < cfgs.size(); i = next.fetch_add(1))
            results[i] = run_experiment(cfgs[i], g, &tables);
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < std::min(jobs, cfgs.size()); ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::string csv = result_csv_header() + "\n";
    std::printf("sweep over %s:\n", param.c_str());
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        csv += result_csv_row(cfgs[i], results[i]) + "\n";
        std::printf("  %s=%zu  mean %.4f +- %.4f\n", param.c_str(), values[i],
                    results[i].mean_acc, results[i].std_acc);
    }
    write_text(dir / ("sweep_" + param + ".csv"), csv);
    write_text(dir / "config.txt", render_config(base));
    std::printf("wrote %s\n", (dir / ("sweep_" + param + ".csv")).string().c_str());
    return 0;
}

// ---- selftest ---------------------------------------------------------------

// Independent re-derivations of the numeric contracts, compact versions of
// the oracles the test suite uses.

bool selftest_grad(std::string& detail) {
    Graph g = generate_sbm({{5, 5, 5, 5}, 0.3, 0.05, 8, 3.0, 1.0}, 101);
    NormalizedAdjacency adj = normalized_adjacency(g);
    auto [ta, tt] = build_token_tables(g, adj, {4, 0.15}, 3);
    SequenceBatch sa = build_sequences(g, ta, {0.5, 2, 2}, 101);
    SequenceBatch st = build_sequences(g, tt, {0.5, 2, 2}, 101);
    Model model({8, 16, 32, 1, 2, g.c, 0.0, true});
    model.init_params(8);
    Var feats = Model::features_leaf(g);
    SplitAssignment split = make_split(g, SplitKind::dense, 1);
    const auto mask = split.mask(Role::train);
    auto loss = [&] {
        return model
            .forward_full(feats, sa, st, 0.4, 0.7, g.labels, mask, Mode::train, 9)
            .loss;
    };
    const double err = grad_check(loss, model.params(), 1e-5);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max rel err %.3e", err);
    detail = buf;
    return err <= 1e-4;
}

bool selftest_topk(std::string& detail, std::size_t instances) {
    Rng rng(404);
    for (std::size_t inst = 0; inst < instances; ++inst) {
        const std::size_t n = 20 + uniform_index(rng, 181);
        const std::size_t d = 3 + uniform_index(rng, 10);
        const std::size_t k = 1 + uniform_index(rng, std::min<std::size_t>(10, n - 1));
        std::vector<double> F(n * d);
        for (auto& v : F) v = normal01(rng);
        TokenTable table = cosine_topk(F, n, d, k, ViewTag::attribute);
        for (std::size_t i = 0; i < n; ++i) {
            // full pairwise scores, stable sort, same tie rule
            std::vector<std::pair<double, std::int32_t>> scored;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                double dot = 0, si = 0, sj = 0;
                for (std::size_t t = 0; t < d; ++t) {
                    dot += F[i * d + t] * F[j * d + t];
                    si += F[i * d + t] * F[i * d + t];
                    sj += F[j * d + t] * F[j * d + t];
                }
                const double s =
                    (si == 0 || sj == 0) ? 0.0 : dot / (std::sqrt(si) * std::sqrt(sj));
                scored.emplace_back(s, static_cast<std::int32_t>(j));
            }
            std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            for (std::size_t j = 0; j < k; ++j)
                if (table.row(i)[j] != scored[j].second) {
                    detail = "mismatch at instance " + std::to_string(inst);
                    return false;
                }
        }
    }
    detail = std::to_string(instances) + " instances exact";
    return true;
}

bool selftest_hop_bound(std::string& detail, std::size_t trials) {
    Rng rng(505);
    std::size_t done = 0;
    while (done < trials) {
        Graph g = generate_sbm({{20, 20}, 0.2, 0.05, 5, 2.0, 1.0}, 600 + done);
        NormalizedAdjacency adj = normalized_adjacency(g);
        auto [ta, tt] = build_token_tables(g, adj, {3, 0.15}, 2 + uniform_index(rng, 5));
        for (std::size_t rep = 0; rep < 50 && done < trials; ++rep, ++done) {
            const std::size_t i = uniform_index(rng, g.n);
            const double p = uniform01(rng);
            const std::size_t t = 1 + uniform_index(rng, 4);
            auto tokens = swap_tokens(ta, i, p, t, rng);
            if (!hop_bound_oracle(ta, i, tokens, t)) {
                detail = "violation at trial " + std::to_string(done);
                return false;
            }
        }
    }
    detail = std::to_string(trials) + " trials inside the bound";
    return true;
}

bool selftest_ppr(std::string& detail, std::size_t instances) {
    Rng rng(606);
    for (std::size_t inst = 0; inst < instances; ++inst) {
        const std::size_t n = 20 + uniform_index(rng, 181);
        const std::size_t K = uniform_index(rng, 11);
        Graph g = generate_sbm({{n / 2, n - n / 2}, 0.07, 0.02, 4, 1.0, 1.0}, 700 + inst);
        NormalizedAdjacency adj = normalized_adjacency(g);
        std::vector<double> x(n * 4);
        for (auto& v : x) v = normal01(rng);
        std::vector<double> got = ppr_propagate(adj, x, 4, {K, 0.15});

        // dense oracle
        std::vector<double> ahat(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double di = 1.0 / std::sqrt(static_cast<double>(g.degree(i)) + 1.0);
            ahat[i * n + i] = di * di;
            for (auto it = g.row_begin(i); it != g.row_end(i); ++it)
                ahat[i * n + static_cast<std::size_t>(*it)] =
                    di / std::sqrt(static_cast<double>(g.degree(static_cast<std::size_t>(*it))) + 1.0);
        }
        std::vector<double> h = x, next(n * 4);
        for (std::size_t step = 0; step < K; ++step) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < 4; ++j) {
                    double acc = 0.0;
                    for (std::size_t kk = 0; kk < n; ++kk) acc += ahat[i * n + kk] * h[kk * 4 + j];
                    next[i * 4 + j] = 0.85 * acc + 0.15 * x[i * 4 + j];
                }
            h = next;
        }
        for (std::size_t i = 0; i < h.size(); ++i)
            if (std::abs(got[i] - h[i]) > 1e-10) {
                detail = "entry mismatch at instance " + std::to_string(inst);
                return false;
            }
    }
    detail = std::to_string(instances) + " instances within 1e-10";
    return true;
}

bool selftest_determinism(std::string& detail) {
    TrainConfig cfg;
    cfg.dataset = "selftest";
    cfg.sbm = {{12, 12}, 0.3, 0.05, 4, 3.0, 1.0};
    cfg.k = 3;
    cfg.hidden_dim = 8;
    cfg.ffn_dim = 16;
    cfg.heads = 2;
    cfg.dropout = 0.2;
    cfg.max_epochs = 6;
    cfg.patience = 6;
    cfg.runs = 2;
    cfg.learning_rate = 0.01;
    Graph g = generate_sbm(cfg.sbm, cfg.base_seed);
    const std::string a = result_csv_row(cfg, run_experiment(cfg, g));
    const std::string b = result_csv_row(cfg, run_experiment(cfg, g));
    detail = a;
    return a == b;
}

int cmd_selftest(bool quick) {
    struct Check {
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const std::size_t topk_instances = quick ? 3 : 10;
    const std::size_t hop_trials = quick ? 200 : 1000;
    const std::size_t ppr_instances = quick ? 3 : 8;
    std::vector<Check> checks = {
        {"full-loss gradient check", [](std::string& d) { return selftest_grad(d); }},
        {"top-k brute-force oracle",
         [=](std::string& d) { return selftest_topk(d, topk_instances); }},
        {"token-swap hop bound", [=](std::string& d) { return selftest_hop_bound(d, hop_trials); }},
        {"propagation dense oracle",
         [=](std::string& d) { return selftest_ppr(d, ppr_instances); }},
        {"training determinism", [](std::string& d) { return selftest_determinism(d); }},
    };
    bool all_ok = true;
    for (auto& check : checks) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        const bool ok = check.fn(detail);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %-28s %s (%.1fs)\n", ok ? "PASS" : "FAIL", check.name, detail.c_str(),
                    secs);
        all_ok = all_ok && ok;
    }
    if (!all_ok) throw CheckFailure("selftest failed");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"token-swapping graph transformer for node classification"};
    app.require_subcommand(1);

    CommonArgs prep_args, train_args, eval_args, ablate_args, sweep_args;
    std::string eval_model, eval_role = "test";
    std::string sweep_param, sweep_values;
    std::size_t sweep_jobs = 1;
    bool selftest_quick = false;

    auto* prep = app.add_subcommand("prepare", "build and cache token tables and sequences");
    add_common(prep, prep_args);
    auto* train = app.add_subcommand("train", "run the multi-seed training protocol");
    add_common(train, train_args);
    auto* evalc = app.add_subcommand("eval", "evaluate a saved checkpoint");
    add_common(evalc, eval_args, false);
    evalc->add_option("-m,--model", eval_model, "checkpoint path")->required();
    evalc->add_option("--role", eval_role, "train|validation|test");
    auto* ablate = app.add_subcommand("ablate", "run the four model variants");
    add_common(ablate, ablate_args);
    auto* sweep = app.add_subcommand("sweep", "sweep swap rounds t or augmentation count s");
    add_common(sweep, sweep_args);
    sweep->add_option("--param", sweep_param, "t or s")->required();
    sweep->add_option("--values", sweep_values, "comma-separated values");
    sweep->add_option("--jobs", sweep_jobs, "parallel workers");
    auto* selftest = app.add_subcommand("selftest", "run the built-in numeric checks");
    selftest->add_flag("--quick", selftest_quick, "reduced trial counts");

    try {
        app.parse(argc, argv);
        if (*prep) return cmd_prepare(prep_args);
        if (*train) return cmd_train(train_args);
        if (*evalc) return cmd_eval(eval_args, eval_model, eval_role);
        if (*ablate) return cmd_ablate(ablate_args);
        if (*sweep) return cmd_sweep(sweep_args, sweep_param, sweep_values, sweep_jobs);
        if (*selftest) return cmd_selftest(selftest_quick);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : kExitUsage;
    } catch (const CheckFailure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitCheck;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return 0;
}
