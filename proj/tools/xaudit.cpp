// xaudit: generate, train, audit, remediate, verify.
//
// Exit status: 0 success (no flagged findings / verdict not regressed),
// 2 findings present or verdict regressed, 1 any error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "xaudit/xaudit.hpp"

namespace fs = std::filesystem;
using namespace xaudit;

namespace {

struct Common {
    std::optional<std::uint64_t> seed;
    std::string config;
    unsigned workers = default_workers();
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
    cmd->add_option("--seed", c.seed, "Global seed");
    cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
    auto* out = cmd->add_option("--out", c.out, "Output directory");
    if (out_required) out->required();
}

// One config document serves every command; each reads its own sections.
Json load_config(const std::string& path) {
    if (path.empty()) return Json::object();
    Json j = parse_json(read_text_file(path), "config", ErrorKind::ConfigError);
    require(j.is_object(), ErrorKind::ConfigError, "config: expected an object");
    static const std::set<std::string> sections = {"corpus", "issues", "arch", "train", "audit", "policy"};
    for (auto it = j.begin(); it != j.end(); ++it)
        require(sections.count(it.key()) > 0, ErrorKind::ConfigError, "config: unknown section '" + it.key() + "'");
    return j;
}

const Json* section(const Json& cfg, const char* name) { return cfg.contains(name) ? &cfg.at(name) : nullptr; }

void print_warnings(const Dataset& ds) {
    for (const auto& w : ds.warnings) std::cerr << "warning: " << w << "\n";
}

// "kind:key=val,key=val"
IssueSpec parse_issue_arg(const std::string& arg) {
    IssueSpec s;
    const auto colon = arg.find(':');
    s.kind = parse_issue_kind(arg.substr(0, colon), ErrorKind::ConfigError);
    if (colon == std::string::npos) return s;
    std::stringstream ss(arg.substr(colon + 1));
    std::string kv;
    while (std::getline(ss, kv, ',')) {
        if (kv.empty()) continue;
        const auto eq = kv.find('=');
        require(eq != std::string::npos, ErrorKind::ConfigError, "issue parameter '" + kv + "' must be key=value");
        const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
        double v = 0.0;
        std::size_t used = 0;
        try {
            v = std::stod(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        require(used == value.size() && !value.empty(), ErrorKind::ConfigError,
                "issue parameter '" + key + "' has non-numeric value '" + value + "'");
        set_issue_param(s, key, v);
    }
    return s;
}

// ---------------------------------------------------------------------------

struct GenArgs {
    Common common;
    std::optional<int> size, count, classes;
    std::optional<std::string> task;
    std::vector<std::string> issues;
};

int cmd_gen(const GenArgs& a) {
    const Json cfg = load_config(a.common.config);
    CorpusSpec spec;
    if (const Json* c = section(cfg, "corpus")) spec = corpus_spec_from_json(*c);
    std::vector<IssueSpec> issues;
    if (const Json* is = section(cfg, "issues")) {
        require(is->is_array(), ErrorKind::ConfigError, "config: issues must be an array");
        for (const auto& j : *is) issues.push_back(issue_spec_from_json(j));
    }
    if (a.size) spec.image_size = *a.size;
    if (a.count) spec.count = *a.count;
    if (a.classes) spec.class_count = *a.classes;
    if (a.task) spec.task = parse_task(*a.task, ErrorKind::ConfigError);
    if (a.common.seed) spec.seed = *a.common.seed;
    if (!a.issues.empty()) {
        issues.clear();
        for (const auto& s : a.issues) issues.push_back(parse_issue_arg(s));
    }
    validate(spec);
    for (const auto& i : issues) validate(i, spec.image_size);

    const Corpus corpus = generate_corpus(spec, issues);
    write_corpus(a.common.out, corpus, corpus_config_json(spec, issues));
    std::cout << "wrote " << corpus.dataset.size() << " images to " << a.common.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    Common common;
    std::string data;
    std::optional<int> epochs, batch_size;
    std::optional<double> learning_rate;
    std::optional<std::string> normalization;
};

int cmd_train(const TrainArgs& a) {
    const Json cfg = load_config(a.common.config);
    TrainConfig tc;
    if (const Json* t = section(cfg, "train")) tc = train_config_from_json(*t);
    if (a.epochs) tc.epochs = *a.epochs;
    if (a.batch_size) tc.batch_size = *a.batch_size;
    if (a.learning_rate) tc.learning_rate = *a.learning_rate;
    if (a.normalization) tc.normalization = parse_normalization(*a.normalization);
    if (a.common.seed) tc.seed = *a.common.seed;
    validate(tc);

    const Dataset ds = load_dataset(a.data, a.common.workers);
    print_warnings(ds);
    require(!ds.images.empty(), ErrorKind::EmptyDataset, "dataset '" + a.data + "' has no images");
    const int size = ds.images[0].width;
    ArchSpec arch = ArchSpec::default_for(size, ds.manifest.task, ds.manifest.task == Task::Classification ? ds.manifest.class_count : 1);
    if (const Json* j = section(cfg, "arch")) arch = arch_from_json(*j, arch);

    const auto result = train(init_model(arch, tc.seed), ds.manifest, ds.images, tc, a.common.workers);
    fs::create_directories(a.common.out);
    write_binary_file(fs::path(a.common.out) / "model.ckpt", write_checkpoint(result.model));

    Json history;
    Json echo;
    echo["train"] = to_json(tc);
    echo["arch"] = to_json(arch);
    history["config"] = std::move(echo);
    history["dataset"] = dataset_id(ds);
    history["model"] = model_id(result.model);
    history["loss"] = result.history;
    if (ds.manifest.task == Task::Classification) {
        const double acc = accuracy(result.model, ds.manifest, ds.images, a.common.workers);
        history["train_accuracy"] = acc;
        std::cout << "train accuracy " << acc << "\n";
    }
    write_text_file((fs::path(a.common.out) / "history.json").string(), dump_json(history));
    std::cout << "final loss " << result.history.back() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct AuditArgs {
    Common common;
    std::string data, model;
    std::optional<std::string> method;
    std::optional<double> s_flag;
    bool overlays = false;
};

ImageSlice overlay(const ImageSlice& img, const Mask& m) {
    ImageSlice out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (!m.at(x, y)) continue;
            const bool edge = x == 0 || y == 0 || x == img.width - 1 || y == img.height - 1 || !m.at(x - 1, y) ||
                              !m.at(x + 1, y) || !m.at(x, y - 1) || !m.at(x, y + 1);
            if (edge) out.at(x, y) = static_cast<std::uint16_t>(img.max_value);
        }
    return out;
}

int cmd_audit(const AuditArgs& a) {
    const Json cfg = load_config(a.common.config);
    AuditConfig ac;
    if (const Json* j = section(cfg, "audit")) ac = audit_config_from_json(*j);
    if (a.method) ac.method = parse_attribution_method(*a.method);
    if (a.s_flag) ac.s_flag = *a.s_flag;
    validate(ac);

    const PrototypeModel model = read_checkpoint(read_binary_file(a.model));
    const Dataset ds = load_dataset(a.data, a.common.workers);
    print_warnings(ds);
    const AuditReport report = audit_dataset(model, ds, ac, a.common.workers);
    fs::create_directories(a.common.out);
    write_text_file((fs::path(a.common.out) / "report.json").string(), dump_json(to_json(report)));

    if (a.overlays) {
        const fs::path dir = fs::path(a.common.out) / "overlays";
        fs::create_directories(dir);
        for (const auto& f : report.findings) {
            const auto& img = ds.images[find_entry(ds.manifest, f.image_id)];
            write_binary_file(dir / (f.image_id + "_" + to_string(f.kind) + ".pgm"), write_pgm(overlay(img, f.region.mask)));
        }
    }

    for (const auto& [k, agg] : report.aggregates)
        std::cout << to_string(k) << ": flagged " << agg.flagged_fraction << ", mean severity " << agg.mean_severity << "\n";
    for (const auto& e : report.errors) std::cerr << "image " << e.image_id << ": " << e.kind << ": " << e.message << "\n";
    return has_flagged_findings(report) ? 2 : 0;
}

// ---------------------------------------------------------------------------

struct RemediateArgs {
    Common common;
    std::string data, report;
    std::optional<double> threshold;
    bool dry_run = false;
};

int cmd_remediate(const RemediateArgs& a) {
    const Json cfg = load_config(a.common.config);
    RemediationPolicy policy = RemediationPolicy::defaults();
    if (const Json* j = section(cfg, "policy")) policy = policy_from_json(*j);
    if (a.threshold) policy.severity_threshold = *a.threshold;
    validate(policy);

    const AuditReport report = report_from_json(parse_json(read_text_file(a.report), "report"));
    const Dataset ds = load_dataset(a.data, a.common.workers);
    print_warnings(ds);
    require(report.dataset == dataset_id(ds), ErrorKind::DatasetMismatch, "report was produced for a different dataset");

    const RemediationPlan plan = plan_remediation(report, policy);
    const RemediationResult result = apply_remediation(ds, plan, policy.fill, a.common.workers);
    fs::create_directories(a.common.out);
    write_text_file((fs::path(a.common.out) / "plan.json").string(), dump_json(to_json(plan)));
    std::cout << plan.actions.size() << " planned actions\n";
    if (a.dry_run) return 0;
    write_dataset(a.common.out, result.dataset);
    write_text_file((fs::path(a.common.out) / "provenance.jsonl").string(), to_jsonl(result.log));
    std::cout << "wrote " << result.dataset.size() << " images to " << a.common.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
    Common common;
    std::string before, after;
};

int cmd_verify(const VerifyArgs& a) {
    const AuditReport before = report_from_json(parse_json(read_text_file(a.before), "before report"));
    const AuditReport after = report_from_json(parse_json(read_text_file(a.after), "after report"));
    const VerifyResult r = verify_remediation(before, after);
    for (const auto& d : r.kinds)
        std::cout << to_string(d.kind) << ": flagged " << d.flagged_before << " -> " << d.flagged_after << ", severity "
                  << d.severity_before << " -> " << d.severity_after << (d.acted ? " (acted)" : "") << "\n";
    std::cout << "verdict: " << r.verdict << "\n";
    if (!a.common.out.empty()) {
        fs::create_directories(a.common.out);
        write_text_file((fs::path(a.common.out) / "verify.json").string(), dump_json(to_json(r)));
    }
    return r.verdict == "regressed" ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Explainability-driven data auditing"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate a synthetic corpus with ground truth");
    add_common(g, gen.common, true);
    g->add_option("--size", gen.size, "Image side length");
    g->add_option("--count", gen.count, "Number of images");
    g->add_option("--task", gen.task, "classification | regression");
    g->add_option("--classes", gen.classes, "Class count (classification)");
    g->add_option("--issue", gen.issues, "Issue to inject, kind[:key=value,...]; repeatable");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train the prototype model");
    add_common(t, tr.common, true);
    t->add_option("--data", tr.data, "Dataset root")->required();
    t->add_option("--epochs", tr.epochs);
    t->add_option("--batch-size", tr.batch_size);
    t->add_option("--learning-rate,--lr", tr.learning_rate);
    t->add_option("--normalization", tr.normalization, "per_image_zscore | global_minmax | raw");

    AuditArgs au;
    auto* u = app.add_subcommand("audit", "Audit a dataset against a trained model");
    add_common(u, au.common, true);
    u->add_option("--data", au.data, "Dataset root")->required();
    u->add_option("--model", au.model, "Checkpoint file")->required();
    u->add_option("--method", au.method, "occlusion | grad_input | critical_subset");
    u->add_option("--s-flag", au.s_flag, "Severity at which an image counts as flagged");
    u->add_flag("--overlays", au.overlays, "Write image + region outline PGMs per finding");

    RemediateArgs re;
    auto* r = app.add_subcommand("remediate", "Plan and apply remediation actions");
    add_common(r, re.common, true);
    r->add_option("--data", re.data, "Dataset root")->required();
    r->add_option("--report", re.report, "Audit report")->required();
    r->add_option("--threshold", re.threshold, "Severity threshold for actions");
    r->add_flag("--dry-run", re.dry_run, "Write the plan only");

    VerifyArgs ve;
    auto* v = app.add_subcommand("verify", "Compare audit reports before and after remediation");
    add_common(v, ve.common, false);
    v->add_option("--before", ve.before, "Report before remediation")->required();
    v->add_option("--after", ve.after, "Report after remediation")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*g) return cmd_gen(gen);
        if (*t) return cmd_train(tr);
        if (*u) return cmd_audit(au);
        if (*r) return cmd_remediate(re);
        if (*v) return cmd_verify(ve);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
