// raddet: dataset generation, training, evaluation, detection, ROC
// comparison, CFAR calibration and the module self-test suite behind one
// executable. All randomness derives from --seed; identical invocations
// produce byte-identical outputs.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "raddet/cfar.hpp"
#include "raddet/datagen.hpp"
#include "raddet/eval.hpp"
#include "raddet/model.hpp"
#include "raddet/selftest.hpp"
#include "raddet/serialize.hpp"
#include "raddet/ssm.hpp"
#include "raddet/train.hpp"

namespace fs = std::filesystem;
using namespace raddet;

namespace {

void make_run_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (!fs::exists(out)) throw IoError("cannot create run directory: " + out);
}

void echo_config(CLI::App* sub, const std::string& out_dir) {
    std::string text = sub->config_to_str(true, false);
    write_file_bytes(out_dir + "/config_resolved.txt", text);
}

CfarVariant parse_variant(const std::string& name, int k) {
    if (name == "ca") return CfarVariant::ca();
    if (name == "os") return CfarVariant::os(k);
    if (name == "go") return CfarVariant::go();
    if (name == "so") return CfarVariant::so();
    throw InvalidInput("unknown CFAR variant: " + name);
}

struct CfarCliSpec {
    CfarVariant variant = CfarVariant::ca();
    CfarWindow window = CfarWindow::defaults_2d();
    double pfa = 0.01;
    double t = -1.0;  // explicit threshold factor; <0 means calibrate from pfa
};

// "--cfar variant=ca,pfa=0.01[,train=4,guard=2,k=108,t=5.0]"
CfarCliSpec parse_cfar_spec(const std::string& text) {
    CfarCliSpec spec;
    int os_k = 0;
    std::string variant = "ca";
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        size_t eq = item.find('=');
        if (eq == std::string::npos) throw InvalidInput("bad --cfar item: " + item);
        std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (key == "variant") variant = value;
        else if (key == "pfa") spec.pfa = std::stod(value);
        else if (key == "t") spec.t = std::stod(value);
        else if (key == "train") spec.window.train = std::stoi(value);
        else if (key == "guard") spec.window.guard = std::stoi(value);
        else if (key == "train-az") spec.window.train_az = std::stoi(value);
        else if (key == "guard-az") spec.window.guard_az = std::stoi(value);
        else if (key == "k") os_k = std::stoi(value);
        else throw InvalidInput("unknown --cfar key: " + key);
    }
    spec.variant = parse_variant(variant, os_k);
    return spec;
}

double resolve_cfar_threshold(const CfarCliSpec& spec, uint64_t seed) {
    if (spec.t >= 0.0) return spec.t;
    CalibrationOptions opt;
    opt.seed = seed;
    return threshold_factor(spec.variant, spec.window.ring_count(), spec.pfa, opt);
}

std::vector<const LabeledSample*> split_samples(const Dataset& ds, const std::string& split) {
    int id = split == "train" ? kTrain : (split == "val" ? kVal : (split == "test" ? kTest : -1));
    require(id >= 0, "unknown split: " + split);
    std::vector<const LabeledSample*> out;
    for (int i : ds.indices_of(id)) out.push_back(&ds.samples[i]);
    require(!out.empty(), "split '" + split + "' is empty");
    return out;
}

ClutterKind parse_clutter(const std::string& name) {
    if (name == "homogeneous" || name == "hom") return ClutterKind::Homogeneous;
    if (name == "heterogeneous" || name == "het") return ClutterKind::Heterogeneous;
    if (name == "mixed") return ClutterKind::Mixed;
    throw InvalidInput("unknown clutter mode: " + name);
}

DetectionMask mask_from_probs_valid(const std::vector<double>& probs, double tau, int rows,
                                    int cols) {
    return predict_mask(probs, tau, rows, cols);
}

// ---------------------------------------------------------------------------

struct DatagenArgs {
    std::string out;
    int count = 100;
    uint64_t seed = 0;
    SceneConfig scene;
    std::vector<double> ratios{0.7, 0.15, 0.15};
    std::string clutter = "homogeneous";
};

int run_datagen(const DatagenArgs& a, CLI::App* sub) {
    SceneConfig cfg = a.scene;
    cfg.seed = a.seed;
    cfg.clutter = parse_clutter(a.clutter);
    require(a.ratios.size() == 3, "--ratios needs three values");
    make_run_dir(a.out);
    echo_config(sub, a.out);
    gen_dataset(cfg, a.count, {a.ratios[0], a.ratios[1], a.ratios[2]}, a.out);
    auto counts = split_counts(a.count, {a.ratios[0], a.ratios[1], a.ratios[2]});
    std::ostringstream log;
    log << "dataset " << a.out << " count=" << a.count << " train=" << counts[0]
        << " val=" << counts[1] << " test=" << counts[2] << " grid=" << cfg.rows << "x" << cfg.cols
        << "\n";
    write_file_bytes(a.out + "/log.txt", log.str());
    std::cout << "wrote dataset to " << a.out << " (" << a.count << " samples)\n";
    return 0;
}

struct TrainArgs {
    std::string data, out, resume;
    uint64_t seed = 0;
    int N = 32, H = 8, blocks = 2;
    double dt_min = 8.0, dt_max = 128.0;
    TrainConfig tc;
    std::string pos_weight = "auto";
};

int run_train(const TrainArgs& a, CLI::App* sub) {
    Dataset ds = load_dataset(a.data);
    make_run_dir(a.out);
    echo_config(sub, a.out);

    TrainConfig tc = a.tc;
    tc.seed = a.seed;
    if (a.pos_weight == "auto")
        tc.pos_weight_fixed = -1.0;
    else
        tc.pos_weight_fixed = std::stod(a.pos_weight);

    TrainState st;
    if (!a.resume.empty()) {
        st = load_train_state(a.resume);
    } else {
        DetectorConfig mc;
        mc.L = ds.scene.rows * ds.scene.cols;
        mc.N = a.N;
        mc.H = a.H;
        mc.num_blocks = a.blocks;
        mc.dt_min = a.dt_min;
        mc.dt_max = a.dt_max;
        mc.seed = a.seed;
        st = init_train_state(init_model(mc));
    }
    run_epochs(st, ds, tc);

    save_checkpoint(best_model(st), a.out + "/model.ckpt");
    save_train_state(st, a.out + "/state.ckpt");
    write_file_bytes(a.out + "/report.csv", report_csv(st.report));
    std::ostringstream log;
    for (const EpochRecord& r : st.report.records)
        log << "epoch " << r.epoch << " train_loss=" << format_double(r.train_loss)
            << " val_loss=" << format_double(r.val_loss) << " val_pd=" << format_double(r.val_pd)
            << " val_pf=" << format_double(r.val_pf) << "\n";
    log << "best_epoch=" << st.report.best_epoch << "\n";
    write_file_bytes(a.out + "/log.txt", log.str());
    std::cout << "trained " << st.report.records.size() << " epochs; best epoch "
              << st.report.best_epoch << "; outputs in " << a.out << "\n";
    return 0;
}

struct EvalArgs {
    std::string data, split = "test", checkpoint, cfar, out;
    double tau = 0.5;
    uint64_t seed = 0;
};

int run_eval(const EvalArgs& a, CLI::App* sub) {
    require(a.checkpoint.empty() != a.cfar.empty(),
            "eval: pass exactly one of --checkpoint or --cfar");
    Dataset ds = load_dataset(a.data);
    auto samples = split_samples(ds, a.split);

    NamedResult result;
    if (!a.checkpoint.empty()) {
        Checkpoint ck = load_checkpoint(a.checkpoint);
        result.name = "model";
        result.metrics = eval_model(ck.model, samples, a.tau,
                                    ValidRegion::full(ds.scene.rows, ds.scene.cols));
    } else {
        CfarCliSpec spec = parse_cfar_spec(a.cfar);
        CfarConfig cc{spec.variant, spec.window, resolve_cfar_threshold(spec, a.seed)};
        result.name = spec.variant.name();
        result.metrics = eval_cfar(cc, samples);
    }
    std::string csv = metrics_csv({result});
    if (!a.out.empty()) {
        make_run_dir(a.out);
        echo_config(sub, a.out);
        write_file_bytes(a.out + "/metrics.csv", csv);
    }
    std::cout << csv;
    return 0;
}

struct DetectArgs {
    std::string checkpoint, cfar, frame, out;
    int rows = 64, cols = 32;
    double tau = 0.5;
    uint64_t seed = 0;
};

int run_detect(const DetectArgs& a, CLI::App* sub) {
    require(a.checkpoint.empty() != a.cfar.empty(),
            "detect: pass exactly one of --checkpoint or --cfar");
    std::string bytes = read_file_bytes(a.frame);
    size_t cells = static_cast<size_t>(a.rows) * a.cols;
    require(bytes.size() == cells * 4,
            "detect: frame file size does not match --rows/--cols (float32 row-major expected)");
    RangeAzimuthFrame frame;
    frame.rows = a.rows;
    frame.cols = a.cols;
    frame.values.resize(cells);
    for (size_t i = 0; i < cells; ++i)
        frame.values[i] = raddet::detail::read_f32_le(bytes.data() + 4 * i);

    DetectionMask pred;
    if (!a.checkpoint.empty()) {
        Checkpoint ck = load_checkpoint(a.checkpoint);
        std::vector<double> probs = forward(ck.model, frame);
        pred = mask_from_probs_valid(probs, a.tau, a.rows, a.cols);
    } else {
        CfarCliSpec spec = parse_cfar_spec(a.cfar);
        CfarConfig cc{spec.variant, spec.window, resolve_cfar_threshold(spec, a.seed)};
        pred = cfar_detect_2d(frame, cc).mask;
    }

    make_run_dir(a.out);
    echo_config(sub, a.out);
    std::string mask_bytes(reinterpret_cast<const char*>(pred.cells.data()), pred.cells.size());
    write_file_bytes(a.out + "/mask.u8", mask_bytes);

    PanelData panel{&frame, &pred, &pred};
    std::vector<double> fv(frame.values.begin(), frame.values.end());
    std::vector<uint8_t> fb = raddet::detail::minmax_bytes(fv);
    std::vector<uint8_t> pb(pred.cells.size());
    for (size_t i = 0; i < pb.size(); ++i) pb[i] = pred.cells[i] ? 255 : 0;
    int out_cols = 2 * a.cols + 1;
    std::vector<uint8_t> img(static_cast<size_t>(a.rows) * out_cols, 255);
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c) {
            img[static_cast<size_t>(r) * out_cols + c] = fb[static_cast<size_t>(r) * a.cols + c];
            img[static_cast<size_t>(r) * out_cols + a.cols + 1 + c] =
                pb[static_cast<size_t>(r) * a.cols + c];
        }
    write_pgm(a.out + "/panel.pgm", a.rows, out_cols, img);
    std::cout << "detections: " << pred.count() << " cells; outputs in " << a.out << "\n";
    return 0;
}

struct RocArgs {
    std::string data, split = "test", methods = "ca,os,go,so", out;
    double tau = 0.5;
    double pfa = 0.01;
    int max_thresholds = 512;
    int panels = 4;
    uint64_t seed = 0;
};

int run_roc(const RocArgs& a, CLI::App* sub) {
    Dataset ds = load_dataset(a.data);
    auto samples = split_samples(ds, a.split);
    make_run_dir(a.out);
    echo_config(sub, a.out);

    // shared valid region: the default CFAR window's border for all methods
    CfarWindow window = CfarWindow::defaults_2d();
    CfarStatistic st0 = cfar_statistic_2d(samples[0]->frame, window, CfarVariant::ca());
    ValidRegion valid = st0.valid;

    std::vector<NamedResult> results;
    const DetectorModel* model_ptr = nullptr;
    Checkpoint ck;
    std::istringstream in(a.methods);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        NamedResult r;
        if (item.rfind("model:", 0) == 0) {
            ck = load_checkpoint(item.substr(6));
            model_ptr = &ck.model;
            r.name = "model";
            r.roc = roc_model(ck.model, samples, valid, a.max_thresholds);
            r.metrics = eval_model(ck.model, samples, a.tau, valid);
        } else {
            CfarVariant v = parse_variant(item, 0);
            r.name = v.name();
            r.roc = roc_cfar_auto(v, window, samples, a.max_thresholds);
            CalibrationOptions opt;
            opt.seed = a.seed;
            double t = threshold_factor(v, window.ring_count(), a.pfa, opt);
            r.metrics = eval_cfar({v, window, t}, samples);
        }
        results.push_back(std::move(r));
    }
    require(!results.empty(), "roc: no methods given");

    std::vector<PanelData> panels;
    std::vector<DetectionMask> preds;
    int n_panels = std::min<int>(a.panels, static_cast<int>(samples.size()));
    preds.reserve(n_panels);
    for (int i = 0; i < n_panels; ++i) {
        const LabeledSample* s = samples[i];
        if (model_ptr) {
            preds.push_back(
                predict_mask(forward(*model_ptr, s->frame), a.tau, s->frame.rows, s->frame.cols));
        } else {
            CfarCliSpec spec;
            spec.variant = parse_variant(results[0].name, 0);
            CfarConfig cc{spec.variant, window, resolve_cfar_threshold(spec, a.seed)};
            preds.push_back(cfar_detect_2d(s->frame, cc).mask);
        }
    }
    for (int i = 0; i < n_panels; ++i)
        panels.push_back({&samples[i]->frame, &preds[i], &samples[i]->mask});

    compare_report(results, panels, a.out);
    for (const NamedResult& r : results)
        std::cout << r.name << " auc=" << format_double(r.roc.auc)
                  << " pd=" << format_double(r.metrics.pd) << " pf=" << format_double(r.metrics.pf)
                  << "\n";
    return 0;
}

struct CalibrateArgs {
    std::string variant = "ca";
    int ntrain = 16;
    int k = 0;
    double pfa = 0.01;
    uint64_t seed = 0;
};

int run_calibrate(const CalibrateArgs& a) {
    CalibrationOptions opt;
    opt.seed = a.seed;
    double t = threshold_factor(parse_variant(a.variant, a.k), a.ntrain, a.pfa, opt);
    std::cout << format_double(t) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"radar target detection toolkit: CFAR baselines and a trainable state-space detector"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a key-value config file");

    DatagenArgs dg;
    CLI::App* datagen_cmd = app.add_subcommand("datagen", "generate a synthetic dataset");
    datagen_cmd->add_option("--out", dg.out, "output dataset directory")->required();
    datagen_cmd->add_option("--count", dg.count, "number of samples");
    datagen_cmd->add_option("--seed", dg.seed, "random seed");
    datagen_cmd->add_option("--rows", dg.scene.rows, "range bins");
    datagen_cmd->add_option("--cols", dg.scene.cols, "azimuth bins");
    datagen_cmd->add_option("--targets-min", dg.scene.targets_min, "min targets per scene");
    datagen_cmd->add_option("--targets-max", dg.scene.targets_max, "max targets per scene");
    datagen_cmd->add_option("--snr-min", dg.scene.snr_db_min, "min target SNR (dB)");
    datagen_cmd->add_option("--snr-max", dg.scene.snr_db_max, "max target SNR (dB)");
    datagen_cmd->add_option("--clutter", dg.clutter, "homogeneous | heterogeneous | mixed");
    datagen_cmd->add_option("--het-ratio", dg.scene.het_ratio, "heterogeneous region mean ratio");
    datagen_cmd->add_option("--clutter-mean", dg.scene.clutter_mean, "clutter mean level");
    datagen_cmd->add_option("--ratios", dg.ratios, "train/val/test split ratios")->expected(3);

    TrainArgs tr;
    CLI::App* train_cmd = app.add_subcommand("train", "train the detector");
    train_cmd->add_option("--data", tr.data, "dataset directory")->required();
    train_cmd->add_option("--out", tr.out, "run directory")->required();
    train_cmd->add_option("--seed", tr.seed, "random seed");
    train_cmd->add_option("--resume", tr.resume, "resume from a training state file");
    train_cmd->add_option("--state-dim", tr.N, "state dimension N");
    train_cmd->add_option("--channels", tr.H, "channel count H");
    train_cmd->add_option("--blocks", tr.blocks, "number of stacked blocks");
    train_cmd->add_option("--dt-min", tr.dt_min, "initial step size lower bound");
    train_cmd->add_option("--dt-max", tr.dt_max, "initial step size upper bound");
    train_cmd->add_option("--lr", tr.tc.lr, "learning rate");
    train_cmd->add_option("--epochs", tr.tc.epochs, "max epochs");
    train_cmd->add_option("--batch", tr.tc.batch_size, "batch size");
    train_cmd->add_option("--patience", tr.tc.patience, "early stop patience");
    train_cmd->add_option("--pos-weight", tr.pos_weight, "'auto' or a fixed positive weight");

    EvalArgs ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a detector on a split");
    eval_cmd->add_option("--data", ev.data, "dataset directory")->required();
    eval_cmd->add_option("--split", ev.split, "train | val | test");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "model checkpoint");
    eval_cmd->add_option("--cfar", ev.cfar, "CFAR spec, e.g. variant=ca,pfa=0.01");
    eval_cmd->add_option("--tau", ev.tau, "model decision threshold");
    eval_cmd->add_option("--seed", ev.seed, "random seed (CFAR calibration)");
    eval_cmd->add_option("--out", ev.out, "run directory (optional)");

    DetectArgs de;
    CLI::App* detect_cmd = app.add_subcommand("detect", "run detection on one frame file");
    detect_cmd->add_option("--checkpoint", de.checkpoint, "model checkpoint");
    detect_cmd->add_option("--cfar", de.cfar, "CFAR spec");
    detect_cmd->add_option("--frame", de.frame, "raw float32 frame file (row-major)")->required();
    detect_cmd->add_option("--rows", de.rows, "frame rows")->required();
    detect_cmd->add_option("--cols", de.cols, "frame cols")->required();
    detect_cmd->add_option("--tau", de.tau, "model decision threshold");
    detect_cmd->add_option("--seed", de.seed, "random seed (CFAR calibration)");
    detect_cmd->add_option("--out", de.out, "run directory")->required();

    RocArgs rc;
    CLI::App* roc_cmd = app.add_subcommand("roc", "ROC comparison across methods");
    roc_cmd->add_option("--data", rc.data, "dataset directory")->required();
    roc_cmd->add_option("--split", rc.split, "train | val | test");
    roc_cmd->add_option("--methods", rc.methods, "comma list: model:<ckpt>,ca,os,go,so");
    roc_cmd->add_option("--tau", rc.tau, "model decision threshold for the table");
    roc_cmd->add_option("--pfa", rc.pfa, "CFAR calibration target for the table");
    roc_cmd->add_option("--max-thresholds", rc.max_thresholds, "ROC sweep resolution");
    roc_cmd->add_option("--panels", rc.panels, "number of sample panels to render");
    roc_cmd->add_option("--seed", rc.seed, "random seed (CFAR calibration)");
    roc_cmd->add_option("--out", rc.out, "run directory")->required();

    CalibrateArgs ca;
    CLI::App* cal_cmd = app.add_subcommand("cfar-calibrate", "compute a threshold factor");
    cal_cmd->add_option("--variant", ca.variant, "ca | os | go | so");
    cal_cmd->add_option("--ntrain", ca.ntrain, "training cell count")->required();
    cal_cmd->add_option("--pfa", ca.pfa, "target false alarm rate")->required();
    cal_cmd->add_option("--k", ca.k, "OS order index (default 3n/4)");
    cal_cmd->add_option("--seed", ca.seed, "random seed");

    CLI::App* selftest_cmd = app.add_subcommand("selftest", "run the module invariant suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (datagen_cmd->parsed()) return run_datagen(dg, datagen_cmd);
        if (train_cmd->parsed()) return run_train(tr, train_cmd);
        if (eval_cmd->parsed()) return run_eval(ev, eval_cmd);
        if (detect_cmd->parsed()) return run_detect(de, detect_cmd);
        if (roc_cmd->parsed()) return run_roc(rc, roc_cmd);
        if (cal_cmd->parsed()) return run_calibrate(ca);
        if (selftest_cmd->parsed()) return raddet::selftest::run_all(std::cout) == 0 ? 0 : 2;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
