#include "msmrf/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "msmrf/baselines.hpp"
#include "msmrf/errors.hpp"
#include "msmrf/io.hpp"
#include "msmrf/synth.hpp"

namespace msmrf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(const Error& e) {
    if (dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const BoundsError*>(&e))
        return kExitShape;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
        dynamic_cast<const TopologyError*>(&e) || dynamic_cast<const PartitionError*>(&e))
        return kExitConfig;
    return kExitInference;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInference;
    }
}

struct ManifestWriter {
    json manifest;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    std::vector<std::string> outputs;

    void input(const std::string& path) { manifest["inputs"][path] = file_checksum(path); }
    void output(const std::string& name) { outputs.push_back(name); }
    void write(const std::string& out_dir) {
        manifest["outputs"] = outputs;
        manifest["duration_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_json_file(manifest, (fs::path(out_dir) / "manifest.json").string());
    }
};

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path probe = fs::path(dir) / ".write_probe";
    std::ofstream test(probe);
    if (!test) throw ConfigError("output directory not writable: " + dir);
    test.close();
    fs::remove(probe, ec);
}

// ---------------------------------------------------------------------------
// Model config
// ---------------------------------------------------------------------------

struct ModelConfig {
    std::vector<int> states;
    std::vector<EmissionFamily> families;
    bool auto_weights = true;
    double coupling = 2.0;
    json explicit_weights;
    bool population_sd = true;
    json full_params;  // complete serialized ModelParams, optional
};

// "states"/"families" accept either a flat per-scale-index list or a nested
// [l][m] layout.
template <typename T, typename Conv>
std::vector<T> per_scale_list(const json& j, const MultiScaleLattice& lat, Conv conv,
                              const std::string& key) {
    std::vector<T> out;
    if (!j.is_array() || j.empty()) throw ConfigError(key + " must be a non-empty array");
    if (j.front().is_array()) {
        if (static_cast<int>(j.size()) != lat.num_spatial_scales())
            throw ConfigError(key + ": outer list must have one entry per spatial scale");
        for (const auto& row : j) {
            if (static_cast<int>(row.size()) != lat.num_temporal_scales())
                throw ConfigError(key + ": inner list must have one entry per temporal scale");
            for (const auto& e : row) out.push_back(conv(e));
        }
    } else {
        if (static_cast<int>(j.size()) != lat.num_scales())
            throw ConfigError(key + " must cover every scale");
        for (const auto& e : j) out.push_back(conv(e));
    }
    return out;
}

EmissionFamily family_from_string(const std::string& s) {
    if (s == "gaussian") return EmissionFamily::Gaussian;
    if (s == "gamma") return EmissionFamily::Gamma;
    throw ConfigError("unknown emission family: " + s);
}

ModelConfig default_model_config(const MultiScaleLattice& lat) {
    // Rainfall defaults: 2 states with gamma emissions at the finest
    // scale, 3 states with gaussian emissions elsewhere.
    ModelConfig mc;
    for (int si = 0; si < lat.num_scales(); ++si) {
        const bool finest = lat.scale_at(si) == ScaleId{0, 0};
        mc.states.push_back(finest ? 2 : 3);
        mc.families.push_back(finest ? EmissionFamily::Gamma : EmissionFamily::Gaussian);
    }
    return mc;
}

ModelConfig parse_model_config(const json& j, const MultiScaleLattice& lat) {
    ModelConfig mc;
    if (j.contains("params")) {
        mc.full_params = j.at("params");
        mc.states = mc.full_params.at("states_per_scale").get<std::vector<int>>();
        for (const auto& e : mc.full_params.at("emissions"))
            mc.families.push_back(family_from_string(e.at("family").get<std::string>()));
        return mc;
    }
    mc.states = per_scale_list<int>(
        j.at("states"), lat, [](const json& e) { return e.get<int>(); }, "states");
    if (j.contains("families")) {
        mc.families = per_scale_list<EmissionFamily>(
            j.at("families"), lat,
            [](const json& e) { return family_from_string(e.get<std::string>()); }, "families");
    } else {
        for (int si = 0; si < lat.num_scales(); ++si)
            mc.families.push_back(EmissionFamily::Gaussian);
    }
    mc.coupling = j.value("coupling", 2.0);
    mc.population_sd = j.value("population_sd", true);
    if (j.contains("edge_weights") && !j.at("edge_weights").is_string()) {
        mc.auto_weights = false;
        mc.explicit_weights = j.at("edge_weights");
    }
    return mc;
}

ScaleEmissions placeholder_emissions(const MultiScaleLattice& lat, ScaleId sc,
                                     EmissionFamily family, int k) {
    ScaleEmissions em;
    em.family = family;
    em.locations = lat.spatial_size(sc.l);
    em.groups = lat.calendar_groups(sc.m);
    em.k_states = k;
    em.resize();
    if (family == EmissionFamily::Gaussian) {
        // means 0, stddev 1 (placeholders until the first refit)
    } else {
        std::fill(em.zero_mass.begin(), em.zero_mass.end(), 0.01);
    }
    return em;
}

ClassWeights class_weights_from(const json& j) {
    ClassWeights c{j.at("high").get<double>(), j.at("low").get<double>()};
    if (!std::isfinite(c.high) || !std::isfinite(c.low) || c.high < c.low)
        throw ConfigError("edge weights must be finite with high >= low");
    return c;
}

ModelParams build_model_params(const ModelConfig& mc, const ObservationSet& obs,
                               const MultiScaleLattice& lat) {
    if (!mc.full_params.is_null()) return model_params_from_json(mc.full_params);

    ModelParams p;
    p.states_per_scale = mc.states;
    for (int si = 0; si < lat.num_scales(); ++si)
        p.emissions.push_back(
            placeholder_emissions(lat, lat.scale_at(si), mc.families[si], mc.states[si]));

    if (mc.auto_weights) {
        p.edge_weights = default_edge_weights(obs, lat, mc.coupling);
    } else {
        const json& w = mc.explicit_weights;
        ScaleWeights base;
        base.spatial = class_weights_from(w.at("spatial"));
        base.temporal = class_weights_from(w.at("temporal"));
        base.spatial_scale = class_weights_from(w.at("spatial_scale"));
        base.temporal_scale = class_weights_from(w.at("temporal_scale"));
        p.edge_weights.assign(lat.num_scales(), base);
        if (w.contains("per_scale")) {
            const auto& per = w.at("per_scale");
            if (static_cast<int>(per.size()) != lat.num_scales())
                throw ConfigError("edge_weights.per_scale must cover every scale");
            for (int si = 0; si < lat.num_scales(); ++si) {
                const auto& e = per[si];
                if (e.is_null()) continue;
                p.edge_weights[si].spatial = class_weights_from(e.at("spatial"));
                p.edge_weights[si].temporal = class_weights_from(e.at("temporal"));
                p.edge_weights[si].spatial_scale = class_weights_from(e.at("spatial_scale"));
                p.edge_weights[si].temporal_scale = class_weights_from(e.at("temporal_scale"));
            }
        }
        if (w.contains("spatial_pair_overrides")) {
            for (const auto& ov : w.at("spatial_pair_overrides")) {
                const int si = ov.at(0).get<int>();
                if (si < 0 || si >= lat.num_scales())
                    throw ConfigError("spatial_pair_overrides scale index out of range");
                const int s1 = ov.at(1).get<int>(), s2 = ov.at(2).get<int>();
                p.edge_weights[si].spatial_pair[{std::min(s1, s2), std::max(s1, s2)}] = {
                    ov.at(3).get<double>(), ov.at(4).get<double>()};
            }
        }
    }
    return p;
}

std::string optional_csv(const std::optional<double>& v) {
    if (!v) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", *v);
    return buf;
}

json optional_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

}  // namespace

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const SynthArgs& args) {
    return guarded([&] {
        SynthConfig cfg = SynthConfig::from_json(read_json_file(args.config));
        if (args.seed) cfg.seed = *args.seed;
        const MultiScaleLattice lat = MultiScaleLattice::build(cfg.lattice);
        ensure_out_dir(args.out_dir);

        const SynthResult result = generate(cfg, lat);

        ManifestWriter mw;
        mw.manifest["command"] = "synth";
        mw.manifest["method"] = "synth";
        mw.manifest["seed"] = cfg.seed;
        mw.manifest["config"] = cfg.to_json();
        mw.input(args.config);

        const fs::path out(args.out_dir);
        write_observations_csv(result.observations.grid(ScaleId{0, 0}),
                               (out / "observations.csv").string());
        mw.output("observations.csv");
        for (int si = 0; si < lat.num_scales(); ++si) {
            const std::string name = truth_csv_name(lat.scale_at(si));
            write_state_csv(result.truth.grid(si), (out / name).string());
            mw.output(name);
        }
        write_json_file(cfg.to_json(), (out / "synth_config.json").string());
        mw.output("synth_config.json");
        write_json_file(cfg.lattice, (out / "lattice.json").string());
        mw.output("lattice.json");
        mw.write(args.out_dir);
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

int cmd_detect(const DetectArgs& args) {
    return guarded([&] {
        if (args.method != "msstmrf" && args.method != "stmrf" && args.method != "threshold")
            throw ConfigError("unknown method: " + args.method +
                              " (expected msstmrf | stmrf | threshold)");
        const bool needs_model = args.method != "threshold";
        if (needs_model && args.config.empty())
            throw ConfigError("method " + args.method + " requires a model config (--config)");

        const MultiScaleLattice lat = MultiScaleLattice::build_from_file(args.lattice);
        ObservationSet obs = load_observations(args.data, lat);
        obs = aggregate(obs, lat);

        const ModelConfig mc = args.config.empty()
                                   ? default_model_config(lat)
                                   : parse_model_config(read_json_file(args.config), lat);
        ensure_out_dir(args.out_dir);

        ManifestWriter mw;
        mw.manifest["command"] = "detect";
        mw.manifest["method"] = args.method;
        mw.manifest["seed"] = args.seed;
        mw.input(args.data);
        mw.input(args.lattice);
        if (!args.config.empty()) mw.input(args.config);

        GibbsConfig gc;
        gc.burn_in = args.burn_in;
        gc.samples = args.samples;
        gc.thin = args.thin;
        gc.refit_every = args.refit_every;
        gc.chains = args.chains;
        gc.seed = args.seed;
        mw.manifest["config"] = {{"burn_in", gc.burn_in},   {"samples", gc.samples},
                                 {"thin", gc.thin},         {"refit_every", gc.refit_every},
                                 {"chains", gc.chains},     {"method", args.method}};

        StateFieldSet states;
        if (args.method == "threshold") {
            ThresholdParams tparams;
            states = threshold_detect(obs, lat, mc.states, mc.population_sd, &tparams);
            if (!tparams.flagged.empty())
                std::cerr << "warning: " << tparams.flagged.size()
                          << " single-sample groups had stddev taken as 0\n";
            mw.manifest["flagged_groups"] = tparams.flagged.size();
        } else {
            const ModelParams params = build_model_params(mc, obs, lat);
            mw.manifest["params_checksum"] =
                std::hash<std::string>{}(model_params_to_json(params).dump());
            const PosteriorSummary summary = args.method == "msstmrf"
                                                 ? run_inference(obs, lat, params, gc)
                                                 : stmrf_detect(obs, lat, params, gc);
            states = summary.map_states;
            if (args.write_marginals) {
                json marg;
                for (int si = 0; si < lat.num_scales(); ++si) {
                    const ScaleId sc = lat.scale_at(si);
                    marg.push_back({{"l", sc.l},
                                    {"m", sc.m},
                                    {"k", params.k_at(si)},
                                    {"values", summary.marginals[si]}});
                }
                write_json_file(marg, (fs::path(args.out_dir) / "marginals.json").string());
                mw.output("marginals.json");
            }
        }

        const fs::path out(args.out_dir);
        for (int si = 0; si < lat.num_scales(); ++si) {
            const ScaleId sc = lat.scale_at(si);
            const std::string name = state_csv_name(sc);
            write_state_csv(states.grid(si), (out / name).string());
            mw.output(name);

            const auto regions =
                extract_regions(states.grid(si), sc, lat, obs, default_anomaly_states(mc.states[si]));
            const std::string rname = regions_csv_name(sc);
            write_regions_csv(regions, (out / rname).string());
            mw.output(rname);
            if (args.write_region_cells) {
                const std::string cname = "region_cells_l" + std::to_string(sc.l) + "_m" +
                                          std::to_string(sc.m) + ".csv";
                write_region_cells_csv(regions, (out / cname).string());
                mw.output(cname);
            }
        }
        mw.write(args.out_dir);
        return kExitOk;
    });
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

namespace {

struct MethodEval {
    std::string name;
    StateFieldSet states;
};

StateFieldSet read_states_dir(const std::string& dir, const MultiScaleLattice& lat) {
    StateFieldSet z;
    z.scales.resize(lat.num_scales());
    for (int si = 0; si < lat.num_scales(); ++si) {
        const ScaleId sc = lat.scale_at(si);
        fs::path p = fs::path(dir) / state_csv_name(sc);
        if (!fs::exists(p)) p = fs::path(dir) / truth_csv_name(sc);
        if (!fs::exists(p))
            throw ShapeError("no state file for scale (" + std::to_string(sc.l) + "," +
                             std::to_string(sc.m) + ") in " + dir);
        StateGrid g = read_state_csv(p.string());
        if (g.locations != lat.spatial_size(sc.l) || g.times != lat.temporal_size(sc.m))
            throw ShapeError(p.string() + ": grid shape does not match lattice");
        z.scales[si] = std::move(g);
    }
    return z;
}

}  // namespace

int cmd_evaluate(const EvaluateArgs& args) {
    return guarded([&] {
        if (args.pred_dirs.empty()) throw ConfigError("at least one prediction dir required");
        const MultiScaleLattice lat = MultiScaleLattice::build_from_file(args.lattice);
        ObservationSet obs = load_observations(args.data, lat);
        obs = aggregate(obs, lat);
        ensure_out_dir(args.out_dir);

        std::vector<MethodEval> methods;
        for (const auto& dir : args.pred_dirs) {
            MethodEval me;
            const fs::path mf = fs::path(dir) / "manifest.json";
            me.name = fs::path(dir).filename().string();
            if (fs::exists(mf)) {
                const json manifest = read_json_file(mf.string());
                me.name = manifest.value("method", me.name);
            }
            me.states = read_states_dir(dir, lat);
            methods.push_back(std::move(me));
        }

        StateFieldSet truth;
        const bool have_truth = !args.truth_dir.empty();
        if (have_truth) truth = read_states_dir(args.truth_dir, lat);

        const fs::path out(args.out_dir);
        std::ofstream coh(out / "coherence.csv");
        coh << "method,l,m,spatial_coherence,temporal_coherence\n";
        std::ofstream t1(out / "table1.csv");
        t1 << "method,l,m,state,regions,mean_st_size,mean_spatial_size,mean_temporal_size,"
              "mean_x\n";
        std::ofstream t2(out / "table2.csv");
        t2 << "method,state,n_years,mean_months,temporal_coherence,mean_x\n";
        std::ofstream t3(out / "table3.csv");
        t3 << "method,state,n_years,mean_locations,spatial_coherence,mean_x\n";
        std::ofstream t4(out / "table4.csv");
        t4 << "method,state,n_months,mean_locations,spatial_coherence,mean_x\n";
        std::ofstream sco;
        if (have_truth) {
            sco.open(out / "scores.csv");
            sco << "method,l,m,label,precision,recall,f1,tp,fp,fn\n";
        }

        json report;
        report["methods"] = json::array();
        const bool cross_ok = lat.num_spatial_scales() >= 2 && lat.num_temporal_scales() >= 2 &&
                              lat.spatial_size(lat.num_spatial_scales() - 1) == 1;

        for (const auto& me : methods) {
            json mrep;
            mrep["name"] = me.name;
            mrep["coherence"] = json::array();
            mrep["table1"] = json::array();

            for (int si = 0; si < lat.num_scales(); ++si) {
                const ScaleId sc = lat.scale_at(si);
                const auto rep = coherence_report(me.states.grid(si), sc, lat);
                coh << me.name << ',' << sc.l << ',' << sc.m << ',' << optional_csv(rep.spatial)
                    << ',' << optional_csv(rep.temporal) << '\n';
                mrep["coherence"].push_back({{"l", sc.l},
                                             {"m", sc.m},
                                             {"spatial", optional_json(rep.spatial)},
                                             {"temporal", optional_json(rep.temporal)}});

                int max_label = 0;
                for (int v : me.states.grid(si).z) max_label = std::max(max_label, v);
                const auto regions = extract_regions(me.states.grid(si), sc, lat, obs,
                                                     default_anomaly_states(max_label));
                for (const auto& row : size_summary(regions, std::max(max_label, 2))) {
                    t1 << me.name << ',' << sc.l << ',' << sc.m << ',' << row.state << ','
                       << row.count << ',' << optional_csv(row.mean_st_size) << ','
                       << optional_csv(row.mean_spatial_size) << ','
                       << optional_csv(row.mean_temporal_size) << ','
                       << optional_csv(row.mean_value) << '\n';
                    mrep["table1"].push_back({{"l", sc.l},
                                              {"m", sc.m},
                                              {"state", row.state},
                                              {"regions", row.count},
                                              {"mean_st_size", optional_json(row.mean_st_size)},
                                              {"mean_spatial_size",
                                               optional_json(row.mean_spatial_size)},
                                              {"mean_temporal_size",
                                               optional_json(row.mean_temporal_size)},
                                              {"mean_x", optional_json(row.mean_value)}});
                }
            }

            if (cross_ok) {
                const auto cs = cross_scale_report(me.states, obs, lat);
                mrep["cross_scale"] = json::array();
                for (const auto& row : cs.rows) {
                    t2 << me.name << ',' << row.state << ',' << row.n_years << ','
                       << optional_csv(row.mean_count_months) << ','
                       << optional_csv(row.months_coherence) << ','
                       << optional_csv(row.months_mean_x) << '\n';
                    t3 << me.name << ',' << row.state << ',' << row.n_years << ','
                       << optional_csv(row.mean_count_loc_annual) << ','
                       << optional_csv(row.loc_annual_coherence) << ','
                       << optional_csv(row.loc_annual_mean_x) << '\n';
                    t4 << me.name << ',' << row.state << ',' << row.n_months << ','
                       << optional_csv(row.mean_count_loc_monthly) << ','
                       << optional_csv(row.loc_monthly_coherence) << ','
                       << optional_csv(row.loc_monthly_mean_x) << '\n';
                    mrep["cross_scale"].push_back(
                        {{"state", row.state},
                         {"n_years", row.n_years},
                         {"mean_months", optional_json(row.mean_count_months)},
                         {"months_temporal_coherence", optional_json(row.months_coherence)},
                         {"months_mean_x", optional_json(row.months_mean_x)},
                         {"mean_locations_annual", optional_json(row.mean_count_loc_annual)},
                         {"locations_annual_spatial_coherence",
                          optional_json(row.loc_annual_coherence)},
                         {"locations_annual_mean_x", optional_json(row.loc_annual_mean_x)},
                         {"n_months", row.n_months},
                         {"mean_locations_monthly", optional_json(row.mean_count_loc_monthly)},
                         {"locations_monthly_spatial_coherence",
                          optional_json(row.loc_monthly_coherence)},
                         {"locations_monthly_mean_x", optional_json(row.loc_monthly_mean_x)}});
                }
            } else {
                mrep["cross_scale"] = nullptr;
            }

            if (have_truth) {
                mrep["scores"] = json::array();
                for (int si = 0; si < lat.num_scales(); ++si) {
                    const ScaleId sc = lat.scale_at(si);
                    for (const auto& s : score_against_truth(me.states.grid(si), truth.grid(si))) {
                        sco << me.name << ',' << sc.l << ',' << sc.m << ',' << s.label << ','
                            << s.precision << ',' << s.recall << ',' << s.f1 << ',' << s.tp << ','
                            << s.fp << ',' << s.fn << '\n';
                        mrep["scores"].push_back({{"l", sc.l},
                                                  {"m", sc.m},
                                                  {"label", s.label},
                                                  {"precision", s.precision},
                                                  {"recall", s.recall},
                                                  {"f1", s.f1}});
                    }
                }
            }
            report["methods"].push_back(std::move(mrep));
        }

        write_json_file(report, (out / "report.json").string());

        ManifestWriter mw;
        mw.manifest["command"] = "evaluate";
        mw.manifest["method"] = "evaluate";
        mw.manifest["config"] = {{"pred", args.pred_dirs}, {"truth", args.truth_dir}};
        mw.input(args.data);
        mw.input(args.lattice);
        mw.output("coherence.csv");
        mw.output("table1.csv");
        mw.output("table2.csv");
        mw.output("table3.csv");
        mw.output("table4.csv");
        if (have_truth) mw.output("scores.csv");
        mw.output("report.json");
        mw.write(args.out_dir);
        return kExitOk;
    });
}

}  // namespace msmrf
