// avtag: AV scan-report tagging pipeline driver.
//
// Exit codes: 0 success, 2 configuration error, 3 ingestion error,
// 4 validation error.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "avtag/dataset_builder.hpp"
#include "avtag/errors.hpp"
#include "avtag/evaluator.hpp"
#include "avtag/pipeline.hpp"
#include "avtag/scan_ingest.hpp"
#include "avtag/util.hpp"

namespace fs = std::filesystem;
using namespace avtag;

namespace {

struct CommonArgs {
    std::optional<std::string> config;
    std::optional<std::string> reports;
    std::optional<std::string> rules;
    std::optional<std::string> wordlist;
    std::optional<std::string> affixes;
    std::optional<std::string> correlations;
    std::optional<std::string> overrides_dir;
    std::optional<std::string> output_dir;
    std::vector<std::string> thresholds;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> mode;
    bool strict = false;
};

void add_common_options(CLI::App& sub, CommonArgs& args) {
    sub.add_option("--config", args.config, "Pipeline config file (JSON)");
    sub.add_option("--reports", args.reports, "Scan-report JSONL file");
    sub.add_option("--rules", args.rules, "Label format rule file (TSV)");
    sub.add_option("--wordlist", args.wordlist, "User wordlist overlay (TSV)");
    sub.add_option("--affixes", args.affixes, "Affix list for trivial aliasing");
    sub.add_option("--correlations", args.correlations, "Engine correlation group file");
    sub.add_option("--alias-overrides", args.overrides_dir,
                   "Directory with per-category alias override files");
    sub.add_option("--output-dir", args.output_dir, "Directory for pipeline outputs");
    sub.add_option("--threshold", args.thresholds,
                   "Vote threshold override, e.g. beh=4 (repeatable)");
    sub.add_option("--seed", args.seed, "RNG seed for dataset splits");
    sub.add_option("--threads", args.threads, "Report-processing worker count");
    sub.add_option("--mode", args.mode, "Split mode: temporal or stratified");
    sub.add_flag("--strict", args.strict, "Abort on the first malformed input line");
}

LexicalCategory parse_taggable(const std::string& name) {
    for (LexicalCategory c : kTaggableCategories) {
        if (name == category_key(c)) return c;
    }
    throw ConfigError("unknown category \"" + name + "\" (expected beh, plat, vuln, or pack)");
}

PipelineConfig make_config(const CommonArgs& args) {
    PipelineConfig config;
    if (args.config) config = load_config(*args.config);
    if (args.reports) config.reports = *args.reports;
    if (args.rules) config.rules = *args.rules;
    if (args.wordlist) config.wordlist = *args.wordlist;
    if (args.affixes) config.affixes = *args.affixes;
    if (args.correlations) config.correlations = *args.correlations;
    if (args.overrides_dir) config.alias_overrides_dir = *args.overrides_dir;
    if (args.output_dir) config.output_dir = *args.output_dir;
    if (args.seed) config.split.rng_seed = *args.seed;
    if (args.threads) {
        if (*args.threads < 1) throw ConfigError("threads must be >= 1");
        config.threads = *args.threads;
    }
    if (args.mode) {
        if (*args.mode == "temporal") {
            config.split.mode = SplitConfig::Mode::temporal;
        } else if (*args.mode == "stratified") {
            config.split.mode = SplitConfig::Mode::stratified;
        } else {
            throw ConfigError("--mode must be temporal or stratified");
        }
    }
    if (args.strict) config.strict = true;
    for (const std::string& spec : args.thresholds) {
        const auto eq = spec.find('=');
        std::uint64_t value = 0;
        bool ok = eq != std::string::npos && eq + 1 < spec.size();
        for (std::size_t i = eq + 1; ok && i < spec.size(); ++i) {
            if (!ascii_digit(spec[i])) {
                ok = false;
            } else {
                value = value * 10 + static_cast<std::uint64_t>(spec[i] - '0');
            }
        }
        if (!ok || value < 1 || value > 0xffffffffull) {
            throw ConfigError("bad --threshold \"" + spec + "\" (expected e.g. beh=4)");
        }
        config.thresholds.set(parse_taggable(spec.substr(0, eq)), static_cast<std::uint32_t>(value));
    }
    return config;
}

void cmd_pass1(const PipelineConfig& config) {
    const Pass1Result result = run_pass1(config);
    if (result.corpus.report_count == 0) std::cerr << "warning: corpus is empty\n";
    std::cout << "reports\t" << result.corpus.report_count << '\n'
              << "labels\t" << result.corpus.label_count << '\n'
              << "engines\t" << result.corpus.engine_counts.size() << '\n'
              << "skipped\t" << result.totals.skipped << '\n'
              << "vocabulary\t" << result.resolved_tokens << '\n'
              << "generic\t" << result.generic_tokens << '\n';
}

void cmd_alias(const PipelineConfig& config) {
    const AliasResult result = run_alias(config);
    for (std::size_t i = 0; i < kTaggableCategories.size(); ++i) {
        std::cout << "aliases\t" << category_key(kTaggableCategories[i]) << '\t'
                  << result.alias_counts[i] << '\n';
    }
    std::cout << "skipped\t" << result.totals.skipped << '\n';
}

void cmd_tag(const PipelineConfig& config) {
    const SweepTotals totals = run_tag(config);
    std::cout << "reports\t" << totals.reports << '\n'
              << "skipped\t" << totals.skipped << '\n'
              << "tags\t" << (config.output_dir / kTagFileName).string() << '\n';
}

void cmd_eval(const std::string& predicted, const std::optional<std::string>& reference,
              const std::optional<std::string>& families, const std::string& category_name) {
    if (reference.has_value() == families.has_value()) {
        throw ConfigError("eval needs a reference tag file or --families (exactly one)");
    }
    const LexicalCategory category = parse_taggable(category_name);
    const TagAssignment pred = load_tag_assignment(predicted, category);
    std::cout << std::fixed << std::setprecision(6);
    if (reference) {
        const MetricReport report = multilabel_metrics(pred, load_tag_assignment(*reference, category));
        std::cout << "# tag\ttp\tfp\tfn\tprecision\trecall\tf1\n";
        for (const auto& [tag, m] : report.per_tag) {
            std::cout << tag << '\t' << m.tp << '\t' << m.fp << '\t' << m.fn << '\t' << m.precision
                      << '\t' << m.recall << '\t' << m.f1 << '\n';
        }
        std::cout << "micro\t-\t-\t-\t" << report.micro.precision << '\t' << report.micro.recall
                  << '\t' << report.micro.f1 << '\n';
        std::cout << "weighted\t-\t-\t-\t" << report.weighted.precision << '\t'
                  << report.weighted.recall << '\t' << report.weighted.f1 << '\n';
    } else {
        const FamilyConsistencyReport report =
            family_consistency_report(pred, load_family_file(*families));
        std::cout << "# tag\ttagged\tconsistent\tagree\tprecision\trecall\n";
        for (const auto& [tag, m] : report.per_tag) {
            std::cout << tag << '\t' << m.tagged_count << '\t' << m.consistent_count << '\t'
                      << m.agreement_count << '\t' << m.metrics.precision << '\t'
                      << m.metrics.recall << '\n';
        }
        std::cout << "micro\t-\t-\t-\t" << report.micro.precision << '\t' << report.micro.recall
                  << '\n';
        std::cout << "weighted\t-\t-\t-\t" << report.weighted.precision << '\t'
                  << report.weighted.recall << '\n';
    }
}

void cmd_build(const PipelineConfig& config, const std::optional<std::string>& tag_file,
               const std::vector<std::string>& category_names) {
    const fs::path tags = tag_file ? fs::path(*tag_file) : config.output_dir / kTagFileName;
    if (!fs::exists(tags)) {
        throw ConfigError("tag file not found: " + tags.string() + " (run tag first)");
    }
    std::vector<LexicalCategory> categories;
    if (category_names.empty()) {
        categories.assign(kTaggableCategories.begin(), kTaggableCategories.end());
    } else {
        for (const auto& name : category_names) categories.push_back(parse_taggable(name));
    }
    fs::create_directories(config.output_dir);
    for (LexicalCategory category : categories) {
        const TagPopulation population = filter_tags_file(tags, category, config.split);
        const DatasetManifest manifest = config.split.mode == SplitConfig::Mode::temporal
                                             ? temporal_split(population, config.split)
                                             : stratified_split(population, config.split);
        const fs::path out = config.output_dir / ("manifest_" + category_key(category) + ".jsonl");
        save_manifest(manifest, out);
        std::uint64_t train = 0;
        std::uint64_t test = 0;
        for (const auto& entry : manifest.entries) (entry.test ? test : train) += 1;
        std::cout << category_key(category) << '\t' << manifest.tag_counts.size() << " tags\t"
                  << train << " train\t" << test << " test\t" << out.string() << '\n';
    }
}

void cmd_stats(const PipelineConfig& config) {
    if (config.reports.empty() || !fs::exists(config.reports)) {
        throw ConfigError("reports file not found: " + config.reports.string());
    }
    ReportReader reader(config.reports, config.strict);
    const CorpusStats stats = corpus_stats(reader);
    std::cout << "reports\t" << stats.report_count << '\n'
              << "labels\t" << stats.label_count << '\n'
              << "skipped\t" << reader.records_skipped() << '\n'
              << "engines\t" << stats.engine_counts.size() << '\n';
    for (const auto& [engine, count] : stats.engine_counts) {
        std::cout << "engine\t" << engine << '\t' << count << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AV scan-report tagging pipeline"};
    app.require_subcommand(1);

    CommonArgs pass1_args;
    CLI::App* pass1 = app.add_subcommand("pass1", "First pass: build vocabulary and token statistics");
    add_common_options(*pass1, pass1_args);

    CommonArgs alias_args;
    CLI::App* alias = app.add_subcommand("alias", "Resolve token aliases from first-pass statistics");
    add_common_options(*alias, alias_args);

    CommonArgs tag_args;
    CLI::App* tag = app.add_subcommand("tag", "Second pass: tag every report");
    add_common_options(*tag, tag_args);

    CommonArgs eval_args;
    std::string eval_predicted;
    std::optional<std::string> eval_reference;
    std::optional<std::string> eval_families;
    std::string eval_category = "beh";
    CLI::App* eval = app.add_subcommand("eval", "Score predicted tags against a reference");
    add_common_options(*eval, eval_args);
    eval->add_option("predicted", eval_predicted, "Predicted tag file")->required();
    eval->add_option("reference", eval_reference, "Reference tag file");
    eval->add_option("--families", eval_families, "Family partition file (sha<TAB>family)");
    eval->add_option("--category", eval_category, "Category to evaluate: beh, plat, vuln, pack");

    CommonArgs build_args;
    std::optional<std::string> build_tag_file;
    std::vector<std::string> build_categories;
    CLI::App* build = app.add_subcommand("build", "Build train/test dataset manifests from tags");
    add_common_options(*build, build_args);
    build->add_option("tags", build_tag_file, "Tag file (default: <output-dir>/tags.jsonl)");
    build->add_option("--category", build_categories, "Categories to build (default: all)");

    CommonArgs stats_args;
    CLI::App* stats = app.add_subcommand("stats", "Print corpus statistics");
    add_common_options(*stats, stats_args);

    try {
        app.parse(argc, argv);
        if (pass1->parsed()) cmd_pass1(make_config(pass1_args));
        if (alias->parsed()) cmd_alias(make_config(alias_args));
        if (tag->parsed()) cmd_tag(make_config(tag_args));
        if (eval->parsed()) cmd_eval(eval_predicted, eval_reference, eval_families, eval_category);
        if (build->parsed()) cmd_build(make_config(build_args), build_tag_file, build_categories);
        if (stats->parsed()) cmd_stats(make_config(stats_args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const IngestError& e) {
        std::cerr << "ingest error: " << e.what() << '\n';
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
