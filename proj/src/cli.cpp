#include "ragalign/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "ragalign/error.hpp"
#include "ragalign/metrics.hpp"
#include "ragalign/preference.hpp"
#include "ragalign/sensitivity.hpp"
#include "ragalign/serde.hpp"
#include "ragalign/synth.hpp"

namespace ragalign {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
  if (domains.empty()) fail(Errc::config_error, "at least one domain is required");
  if (k < 1) fail(Errc::config_error, "k must be >= 1");
  if (gamma <= 0.0) fail(Errc::config_error, "gamma must be positive");
  if (alpha <= 0.0) fail(Errc::config_error, "alpha must be positive");
  if (noise_steps < 1) fail(Errc::config_error, "noise.steps must be >= 1");
  retriever.validate();
  router.validate();
  dpo.validate();
}

json PipelineConfig::to_json() const {
  return json{
      {"domains", domains},
      {"dim_in", dim_in},
      {"dim_emb", dim_emb},
      {"k", k},
      {"gamma", gamma},
      {"alpha", alpha},
      {"seed", seed},
      {"noise",
       json{{"steps", noise_steps}, {"l_from", l_from}, {"l_to", l_to}, {"l_values", l_values}}},
      {"retriever",
       json{{"preset", retriever_preset},
            {"learning_rate", retriever.learning_rate},
            {"weight_decay", retriever.weight_decay},
            {"batch_size", retriever.batch_size},
            {"epochs", retriever.epochs},
            {"temperature", retriever.temperature}}},
      {"router",
       json{{"learning_rate", router.learning_rate},
            {"weight_decay", router.weight_decay},
            {"epochs", router.epochs}}},
      {"dpo",
       json{{"learning_rate", dpo.learning_rate},
            {"epochs", dpo.epochs},
            {"batch_size", dpo.batch_size}}},
      {"featurizer", json{{"text_dim", text_dim}, {"context_dim", context_dim}}},
      {"paths",
       json{{"router", router_path}, {"params_dir", params_dir}, {"index_dir", index_dir}}},
      {"diagnose",
       json{{"slope_pi", diag_slope_pi},
            {"slope_qw", diag_slope_qw},
            {"slope_ql", diag_slope_ql},
            {"center", diag_center},
            {"spacing", diag_spacing},
            {"n_samples", diag_samples}}},
  };
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  if (j.contains("domains")) c.domains = j.at("domains").get<std::vector<std::string>>();
  if (j.contains("dim_in")) c.dim_in = j.at("dim_in").get<std::size_t>();
  if (j.contains("dim_emb")) c.dim_emb = j.at("dim_emb").get<std::size_t>();
  if (j.contains("k")) c.k = j.at("k").get<std::size_t>();
  if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
  if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    if (n.contains("steps")) c.noise_steps = n.at("steps").get<std::size_t>();
    if (n.contains("l_from")) c.l_from = n.at("l_from").get<double>();
    if (n.contains("l_to")) c.l_to = n.at("l_to").get<double>();
    if (n.contains("l_values")) c.l_values = n.at("l_values").get<std::vector<double>>();
  }
  if (j.contains("retriever")) {
    const json& r = j.at("retriever");
    if (r.contains("preset")) {
      c.retriever_preset = r.at("preset").get<std::string>();
      if (c.retriever_preset == "main") c.retriever = RetrieverConfig::main_preset();
      else if (c.retriever_preset == "appendix") c.retriever = RetrieverConfig::appendix_preset();
      else fail(Errc::config_error, "retriever.preset must be 'main' or 'appendix'");
    }
    if (r.contains("learning_rate")) c.retriever.learning_rate = r.at("learning_rate").get<double>();
    if (r.contains("weight_decay")) c.retriever.weight_decay = r.at("weight_decay").get<double>();
    if (r.contains("batch_size")) c.retriever.batch_size = r.at("batch_size").get<std::size_t>();
    if (r.contains("epochs")) c.retriever.epochs = r.at("epochs").get<std::size_t>();
    if (r.contains("temperature")) c.retriever.temperature = r.at("temperature").get<double>();
  }
  if (j.contains("router")) {
    const json& r = j.at("router");
    if (r.contains("learning_rate")) c.router.learning_rate = r.at("learning_rate").get<double>();
    if (r.contains("weight_decay")) c.router.weight_decay = r.at("weight_decay").get<double>();
    if (r.contains("epochs")) c.router.epochs = r.at("epochs").get<std::size_t>();
  }
  if (j.contains("dpo")) {
    const json& d = j.at("dpo");
    if (d.contains("learning_rate")) c.dpo.learning_rate = d.at("learning_rate").get<double>();
    if (d.contains("epochs")) c.dpo.epochs = d.at("epochs").get<std::size_t>();
    if (d.contains("batch_size")) c.dpo.batch_size = d.at("batch_size").get<std::size_t>();
  }
  if (j.contains("featurizer")) {
    const json& f = j.at("featurizer");
    if (f.contains("text_dim")) c.text_dim = f.at("text_dim").get<std::size_t>();
    if (f.contains("context_dim")) c.context_dim = f.at("context_dim").get<std::size_t>();
  }
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    if (p.contains("router")) c.router_path = p.at("router").get<std::string>();
    if (p.contains("params_dir")) c.params_dir = p.at("params_dir").get<std::string>();
    if (p.contains("index_dir")) c.index_dir = p.at("index_dir").get<std::string>();
  }
  if (j.contains("diagnose")) {
    const json& d = j.at("diagnose");
    if (d.contains("slope_pi")) c.diag_slope_pi = d.at("slope_pi").get<double>();
    if (d.contains("slope_qw")) c.diag_slope_qw = d.at("slope_qw").get<double>();
    if (d.contains("slope_ql")) c.diag_slope_ql = d.at("slope_ql").get<double>();
    if (d.contains("center")) c.diag_center = d.at("center").get<double>();
    if (d.contains("spacing")) c.diag_spacing = d.at("spacing").get<double>();
    if (d.contains("n_samples")) c.diag_samples = d.at("n_samples").get<std::size_t>();
  }
  return c;
}

std::vector<double> PipelineConfig::schedule_controls() const {
  if (!l_values.empty()) {
    if (l_values.size() != noise_steps)
      fail(Errc::length_mismatch, "noise.l_values must have noise.steps entries");
    return l_values;
  }
  return linear_ramp(l_from, l_to, noise_steps);
}

namespace cli {

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<double> gamma;
  std::optional<double> alpha;
};

void add_common(CLI::App* cmd, CommonArgs& common) {
  cmd->add_option("--config", common.config_path, "Pipeline config JSON");
  cmd->add_option("--seed", common.seed, "Seed override");
  cmd->add_option("--k", common.k, "Retrieval depth override");
  cmd->add_option("--gamma", common.gamma, "Truncation threshold override");
  cmd->add_option("--alpha", common.alpha, "Preference-loss alpha override");
}

PipelineConfig load_config(const CommonArgs& common) {
  PipelineConfig config;
  if (!common.config_path.empty())
    config = PipelineConfig::from_json(read_json_file(common.config_path));
  if (common.seed) config.seed = *common.seed;
  if (common.k) config.k = *common.k;
  if (common.gamma) config.gamma = *common.gamma;
  if (common.alpha) config.alpha = *common.alpha;
  config.validate();
  return config;
}

Provenance make_provenance(const PipelineConfig& config) {
  Provenance p;
  p.config_hash = hash_json(config.to_json());
  p.seed = config.seed;
  return p;
}

PairList read_pairs_jsonl(const std::string& path) {
  PairList pairs;
  for (const auto& row : read_jsonl(path)) {
    pairs.emplace_back(FeatureVector(row.at("image_features").get<std::vector<double>>()),
                       FeatureVector(row.at("text_features").get<std::vector<double>>()));
  }
  return pairs;
}

std::vector<LabeledFeature> read_labeled_jsonl(const std::string& path) {
  std::vector<LabeledFeature> labeled;
  for (const auto& row : read_jsonl(path)) {
    labeled.push_back({FeatureVector(row.at("features").get<std::vector<double>>()),
                       row.at("domain").get<std::string>()});
  }
  return labeled;
}

std::vector<RawRecord> read_records_jsonl(const std::string& path) {
  std::vector<RawRecord> records;
  for (const auto& row : read_jsonl(path)) {
    records.push_back({row.at("id").get<std::string>(), row.at("text").get<std::string>(),
                       FeatureVector(row.at("text_features").get<std::vector<double>>())});
  }
  return records;
}

FeatureVector read_feature_file(const std::string& path) {
  const json j = read_json_file(path);
  if (j.is_array()) return FeatureVector(j.get<std::vector<double>>());
  if (j.contains("values")) return FeatureVector(j.at("values").get<std::vector<double>>());
  if (j.contains("image_features"))
    return FeatureVector(j.at("image_features").get<std::vector<double>>());
  fail(Errc::io_error, "feature file must be an array or carry 'values'");
}

RetrievalRegistry load_registry(const PipelineConfig& config) {
  if (config.params_dir.empty() || config.index_dir.empty())
    fail(Errc::config_error, "paths.params_dir and paths.index_dir must be set");
  RetrievalRegistry registry;
  for (const auto& domain : config.domains) {
    const fs::path params_path = fs::path(config.params_dir) / (domain + ".json");
    const fs::path index_path = fs::path(config.index_dir) / (domain + ".json");
    if (!fs::exists(params_path) || !fs::exists(index_path)) continue;
    registry.add(encoder_from_json(read_json_file(params_path.string())),
                 index_from_json(read_json_file(index_path.string())));
  }
  if (registry.domains().empty())
    fail(Errc::missing_domain, "no domain has both trained params and a built index");
  return registry;
}

RouterParams load_router(const PipelineConfig& config) {
  if (config.router_path.empty()) fail(Errc::config_error, "paths.router must be set");
  return router_from_json(read_json_file(config.router_path));
}

std::unique_ptr<AnswerModel> load_answer_model(const std::string& path) {
  const json j = read_json_file(path);
  const std::string type = j.at("type").get<std::string>();
  if (type == "scripted")
    return std::make_unique<ScriptedAnswerModel>(scripted_model_from_json(j));
  if (type == "categorical") {
    auto [policy, spec] = categorical_policy_from_json(j);
    return std::make_unique<PolicyAnswerModel>(std::move(policy), spec);
  }
  fail(Errc::io_error, "unsupported answer-model type '" + type + "'");
}

void write_loss_csv(const std::string& path, const Provenance& p,
                    const std::vector<EpochStats>& trajectory) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot open '" + path + "' for writing");
  out << "# tool_version=" << p.tool_version << " config_hash=" << p.config_hash
      << " seed=" << p.seed << "\n";
  out << "epoch,loss,cm_loss,oa_loss\n";
  for (const auto& stats : trajectory) {
    out << stats.epoch << "," << json(stats.loss).dump() << ",";
    if (stats.cm_loss) out << json(*stats.cm_loss).dump();
    out << ",";
    if (stats.oa_loss) out << json(*stats.oa_loss).dump();
    out << "\n";
  }
}

void write_loss_csv_plain(const std::string& path, const Provenance& p,
                          const std::vector<double>& losses) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot open '" + path + "' for writing");
  out << "# tool_version=" << p.tool_version << " config_hash=" << p.config_hash
      << " seed=" << p.seed << "\n";
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i)
    out << i << "," << json(losses[i]).dump() << "\n";
}

int run_synth_data(const PipelineConfig& config, const std::string& out_dir) {
  SynthWorldConfig world_config;
  world_config.domains = config.domains;
  world_config.dim_in = config.dim_in;
  world_config.seed = config.seed;
  const SynthWorld world = make_synth_world(world_config);
  const Provenance p = make_provenance(config);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  for (const auto& domain : config.domains) {
    auto dump_pairs = [&](const PairList& pairs, const std::string& name) {
      std::vector<json> rows;
      rows.reserve(pairs.size());
      for (const auto& [img, txt] : pairs)
        rows.push_back(json{{"image_features", img.values}, {"text_features", txt.values}});
      write_jsonl((dir / name).string(), p, rows);
    };
    dump_pairs(world.train_pairs.at(domain), "retriever_" + domain + "_train.jsonl");
    dump_pairs(world.eval_pairs.at(domain), "retriever_" + domain + "_eval.jsonl");

    std::vector<json> context_rows;
    for (const auto& record : world.contexts.at(domain))
      context_rows.push_back(json{{"id", record.id},
                                  {"text", record.text},
                                  {"text_features", record.text_features.values}});
    write_jsonl((dir / ("contexts_" + domain + ".jsonl")).string(), p, context_rows);
  }

  auto dump_labeled = [&](const std::vector<LabeledFeature>& labeled, const std::string& name) {
    std::vector<json> rows;
    rows.reserve(labeled.size());
    for (const auto& item : labeled)
      rows.push_back(json{{"features", item.features.values}, {"domain", item.domain}});
    write_jsonl((dir / name).string(), p, rows);
  };
  dump_labeled(world.router_train, "router_train.jsonl");
  dump_labeled(world.router_eval, "router_eval.jsonl");

  write_qa_jsonl((dir / "qa.jsonl").string(), p, world.qa);
  write_json_file((dir / "scripted_model.json").string(),
                  scripted_model_to_json(world.scripted, p));

  FeaturizerSpec spec{config.dim_in, config.text_dim, config.context_dim};
  SeededRng rng(config.seed + 1);
  CategoricalPolicy policy =
      CategoricalPolicy::random_init({"yes", "no"}, spec.total_dim(), 0.1, rng);
  write_json_file((dir / "policy_init.json").string(),
                  categorical_policy_to_json(policy, spec, p));

  std::cout << json{{"out_dir", out_dir},
                    {"qa_samples", world.qa.size()},
                    {"domains", config.domains}}
                   .dump()
            << "\n";
  return 0;
}

int run_train_retriever(const PipelineConfig& config, const std::string& pairs_path,
                        const std::string& domain, const std::string& out_path,
                        const std::string& eval_path, const std::string& loss_csv) {
  RetrieverConfig rc = config.retriever;
  rc.seed = config.seed;
  const PairList pairs = read_pairs_jsonl(pairs_path);
  RetrieverTrainResult result = train_retriever(pairs, rc, config.dim_emb, domain);
  const Provenance p = make_provenance(config);
  write_json_file(out_path, encoder_to_json(result.params, p));
  if (!loss_csv.empty()) write_loss_csv_plain(loss_csv, p, result.epoch_losses);

  json report{{"domain", domain},
              {"pairs", pairs.size()},
              {"final_loss", result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back()}};
  if (!eval_path.empty()) {
    const PairList eval_pairs = read_pairs_jsonl(eval_path);
    report["recall_at_1"] = recall_at_k(result.params, eval_pairs, 1);
    if (eval_pairs.size() >= 5) report["recall_at_5"] = recall_at_k(result.params, eval_pairs, 5);
  }
  std::cout << report.dump() << "\n";
  return 0;
}

int run_train_router(const PipelineConfig& config, const std::string& data_path,
                     const std::string& out_path, const std::string& eval_path) {
  RouterConfig rc = config.router;
  rc.seed = config.seed;
  const std::vector<LabeledFeature> labeled = read_labeled_jsonl(data_path);
  const RouterParams params = train_router(labeled, config.domains, rc);
  const Provenance p = make_provenance(config);
  write_json_file(out_path, router_to_json(params, p));

  json report{{"domains", config.domains}, {"train_samples", labeled.size()}};
  if (!eval_path.empty()) {
    const std::vector<LabeledFeature> eval = read_labeled_jsonl(eval_path);
    std::size_t correct = 0;
    for (const auto& item : eval)
      if (identify_domain(params, item.features).domain == item.domain) ++correct;
    report["accuracy"] = static_cast<double>(correct) / static_cast<double>(eval.size());
  }
  std::cout << report.dump() << "\n";
  return 0;
}

int run_build_index(const PipelineConfig& config, const std::string& domain,
                    const std::string& records_path, const std::string& params_path,
                    const std::string& out_path) {
  const EncoderParams params = encoder_from_json(read_json_file(params_path));
  const std::vector<RawRecord> records = read_records_jsonl(records_path);
  const ContextIndex index = ContextIndex::build(domain, records, params);
  write_json_file(out_path, index_to_json(index, make_provenance(config)));
  std::cout << json{{"domain", domain}, {"records", index.size()}}.dump() << "\n";
  return 0;
}

json retrieval_to_json(const RetrievalResult& result) {
  json contexts = json::array();
  for (const auto& c : result.contexts)
    contexts.push_back(json{{"id", c.id}, {"text", c.text}, {"score", c.score}});
  return json{{"domain", result.domain},
              {"contexts", std::move(contexts)},
              {"kept_k", result.truncation.kept_k},
              {"original_k", result.truncation.original_k},
              {"ratios", result.truncation.ratios}};
}

int run_retrieve(const PipelineConfig& config, const std::string& image_path,
                 const std::string& out_path) {
  const RetrievalRegistry registry = load_registry(config);
  const RouterParams router = load_router(config);
  const FeatureVector image = read_feature_file(image_path);
  const RetrievalResult result = registry.retrieve(router, image, config.k, config.gamma);
  json output = retrieval_to_json(result);
  output["provenance"] = provenance_to_json(make_provenance(config));
  if (!out_path.empty()) write_json_file(out_path, output);
  std::cout << output.dump() << "\n";
  return 0;
}

int run_gen_prefs(const PipelineConfig& config, const std::string& qa_path,
                  const std::string& model_path, const std::string& out_path) {
  const RetrievalRegistry registry = load_registry(config);
  const RouterParams router = load_router(config);
  const std::vector<QASample> samples = read_qa_jsonl(qa_path);
  const std::unique_ptr<AnswerModel> model = load_answer_model(model_path);

  PreferenceBuildConfig build_config;
  build_config.k = config.k;
  build_config.gamma = config.gamma;
  build_config.noise_steps = config.noise_steps;
  build_config.l_values = config.schedule_controls();
  build_config.seed = config.seed;

  const std::vector<PreferenceSample> dataset =
      build_preference_dataset(samples, *model, registry, router, build_config);
  write_preference_jsonl(out_path, make_provenance(config), dataset);

  const PartitionStats stats = partition_stats(dataset);
  std::cout << json{{"total", stats.total()},
                    {"cm", stats.cm},
                    {"oa1", stats.oa1},
                    {"oa2", stats.oa2}}
                   .dump()
            << "\n";
  return 0;
}

int run_train_dpo(const PipelineConfig& config, const std::string& prefs_path,
                  const std::string& policy_path, const std::string& out_path,
                  const std::string& loss_csv) {
  auto [policy, spec] = categorical_policy_from_json(read_json_file(policy_path));
  const std::vector<PreferenceSample> dataset = read_preference_jsonl(prefs_path);

  std::vector<DpoPair> pairs;
  pairs.reserve(dataset.size());
  for (const auto& sample : dataset) pairs.push_back(to_dpo_pair(sample, policy, spec));

  DpoConfig dc = config.dpo;
  dc.alpha = config.alpha;
  dc.seed = config.seed;
  const std::unique_ptr<Policy> reference = policy.clone();
  const DpoTrainResult result = train_preference(policy, pairs, *reference, dc);

  const Provenance p = make_provenance(config);
  write_json_file(out_path, categorical_policy_to_json(policy, spec, p));
  if (!loss_csv.empty()) write_loss_csv(loss_csv, p, result.trajectory);

  std::cout << json{{"pairs", pairs.size()},
                    {"final_loss",
                     result.trajectory.empty() ? 0.0 : result.trajectory.back().loss}}
                   .dump()
            << "\n";
  return 0;
}

struct EvalArgs {
  std::string task = "vqa";
  std::string gold_path;
  std::string pred_path;
  std::string model_path;
  std::string pred_out;
  std::string out_path;
  bool use_rag = false;
  bool alignment = false;
};

int run_eval(const PipelineConfig& config, const EvalArgs& args) {
  const std::vector<QASample> gold = read_qa_jsonl(args.gold_path);
  const Provenance p = make_provenance(config);

  std::vector<json> pred_rows;
  if (!args.pred_path.empty()) {
    pred_rows = read_jsonl(args.pred_path);
  } else if (!args.model_path.empty()) {
    const std::unique_ptr<AnswerModel> model = load_answer_model(args.model_path);
    std::optional<RetrievalRegistry> registry;
    std::optional<RouterParams> router;
    if (args.use_rag) {
      registry = load_registry(config);
      router = load_router(config);
    }
    for (const auto& sample : gold) {
      std::optional<std::vector<std::string>> contexts;
      if (args.use_rag) {
        const RetrievalResult r = registry->retrieve(*router, sample.image, config.k, config.gamma);
        contexts.emplace();
        for (const auto& c : r.contexts) contexts->push_back(c.text);
      }
      const std::string answer =
          model->answer(sample.image, sample.question, contexts ? &*contexts : nullptr);
      json row{{"id", sample.id}, {"pred", answer}, {"text", answer}};
      // Yes-probability as the ranking score when the model exposes one.
      if (const auto* pm = dynamic_cast<const PolicyAnswerModel*>(model.get())) {
        const int yes = pm->policy().answer_index("yes");
        if (yes >= 0) {
          const PolicyInput input = featurize(sample.image, sample.question,
                                              contexts ? &*contexts : nullptr, pm->spec());
          row["score"] = pm->policy().probabilities(input)[static_cast<std::size_t>(yes)];
        }
      }
      pred_rows.push_back(std::move(row));
    }
    if (!args.pred_out.empty()) write_jsonl(args.pred_out, p, pred_rows);
  } else {
    fail(Errc::config_error, "eval needs --pred or --model");
  }

  std::map<std::string, const QASample*> by_id;
  for (const auto& sample : gold) by_id[sample.id] = &sample;

  json output{{"provenance", provenance_to_json(p)}, {"task", args.task}};
  if (args.task == "vqa") {
    std::vector<bool> preds, labels;
    std::vector<double> scores;
    bool all_scored = true;
    for (const auto& row : pred_rows) {
      auto it = by_id.find(row.at("id").get<std::string>());
      if (it == by_id.end()) fail(Errc::io_error, "prediction id not present in gold set");
      preds.push_back(row.at("pred").get<std::string>() == "yes");
      labels.push_back(it->second->answer == "yes");
      if (row.contains("score")) scores.push_back(row.at("score").get<double>());
      else all_scored = false;
    }
    const ClassificationReport report = classification_metrics(
        preds, labels, all_scored && !scores.empty() ? &scores : nullptr);
    output["accuracy"] = report.accuracy;
    output["f1"] = report.f1;
    if (report.auroc) output["auroc"] = *report.auroc;
    output["counts"] =
        json{{"tp", report.tp}, {"fp", report.fp}, {"tn", report.tn}, {"fn", report.fn}};
  } else if (args.task == "report") {
    std::vector<std::string> candidates, references;
    for (const auto& row : pred_rows) {
      auto it = by_id.find(row.at("id").get<std::string>());
      if (it == by_id.end()) fail(Errc::io_error, "prediction id not present in gold set");
      candidates.push_back(row.contains("text") ? row.at("text").get<std::string>()
                                                : row.at("pred").get<std::string>());
      references.push_back(it->second->answer);
    }
    const GenerationReport report = generation_metrics(candidates, references);
    output["bleu"] = report.bleu;
    output["bleu_n"] = report.bleu_n;
    output["rouge_l"] = report.rouge_l;
  } else {
    fail(Errc::config_error, "task must be 'vqa' or 'report'");
  }

  if (args.alignment) {
    if (args.model_path.empty()) fail(Errc::config_error, "--alignment needs --model");
    const std::unique_ptr<AnswerModel> model = load_answer_model(args.model_path);
    AlignmentConfig ac;
    ac.k = config.k;
    ac.gamma = config.gamma;
    ac.noise_steps = config.noise_steps;
    ac.l_values = config.schedule_controls();
    ac.seed = config.seed;
    const AlignmentReport report =
        alignment_rates(*model, gold, load_registry(config), load_router(config), ac);
    json alignment;
    if (report.cr_rate) alignment["cr_rate"] = *report.cr_rate;
    if (report.or_rate) alignment["or_rate"] = *report.or_rate;
    alignment["cr_numerator"] = report.cr_numerator;
    alignment["cr_denominator"] = report.cr_denominator;
    alignment["or_numerator"] = report.or_numerator;
    alignment["or_denominator"] = report.or_denominator;
    output["alignment"] = std::move(alignment);
  }

  if (!args.out_path.empty()) write_json_file(args.out_path, output);
  std::cout << output.dump() << "\n";
  return 0;
}

int run_diagnose(const PipelineConfig& config, const std::string& reference_path,
                 const std::string& policy_path, const std::string& input_path,
                 const std::string& out_path) {
  auto [reference, ref_spec] = categorical_policy_from_json(read_json_file(reference_path));
  auto [trained, spec] = categorical_policy_from_json(read_json_file(policy_path));
  if (ref_spec.total_dim() != spec.total_dim())
    fail(Errc::dim_mismatch, "reference and trained policies disagree on input layout");

  PolicyInput probe;
  const json input_json = read_json_file(input_path);
  probe.features = input_json.at("features").get<std::vector<double>>();
  probe.visual_dim = spec.visual_dim;
  if (probe.features.size() != spec.total_dim())
    fail(Errc::dim_mismatch, "probe input does not match the policy layout");

  const std::vector<VariableSpec> variables{
      {"x_v", 0, spec.visual_dim},
      {"x_t", spec.visual_dim, spec.text_dim},
      {"x_r", spec.visual_dim + spec.text_dim, spec.context_dim}};

  SeededRng rng(config.seed);
  const std::vector<WeightShift> shifts =
      verify_weight_shift(reference, trained, probe, variables, config.diag_samples, rng);

  json weights = json::array();
  for (const auto& shift : shifts) {
    weights.push_back(json{{"variable", shift.variable},
                           {"wt_before", shift.before.value},
                           {"se_before", shift.before.std_error},
                           {"wt_after", shift.after.value},
                           {"se_after", shift.after.std_error},
                           {"increased", shift.increased}});
  }

  // Planted two-outcome logistic family for the threshold constants.
  const double slope_pi = config.diag_slope_pi;
  const double slope_qw = config.diag_slope_qw;
  const double slope_ql = config.diag_slope_ql;
  const double alpha = config.alpha;
  auto pi_of = [slope_pi](double t) {
    const double p = sigmoid(slope_pi * t);
    return std::vector<double>{1.0 - p, p};
  };
  auto h_of = [&](double t) {
    const double qw = sigmoid(slope_qw * t);
    const double ql = sigmoid(slope_ql * t);
    return compute_h(pi_of(t), {1.0 - qw, qw}, {1.0 - ql, ql}, alpha);
  };

  json constants;
  constants["c"] = assumption_constant(ConstantKind::c, pi_of, h_of, config.diag_center,
                                       config.diag_spacing);
  constants["c1"] = assumption_constant(ConstantKind::c1, pi_of, h_of, config.diag_center,
                                        config.diag_spacing);
  constants["c2"] = assumption_constant(ConstantKind::c2, pi_of, h_of, config.diag_center,
                                        config.diag_spacing);
  const std::vector<double> pi_center = pi_of(config.diag_center);
  const std::vector<double> h_center = h_of(config.diag_center);
  constants["h_normalization"] =
      pi_center[0] * h_center[0] + pi_center[1] * h_center[1];

  json output{{"provenance", provenance_to_json(make_provenance(config))},
              {"weights", std::move(weights)},
              {"constants", std::move(constants)}};
  if (!out_path.empty()) write_json_file(out_path, output);
  std::cout << output.dump() << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Domain-aware retrieval, preference-dataset construction and "
               "preference fine-tuning over toy policies"};
  app.require_subcommand(1);

  CommonArgs common;
  std::function<int()> action;

  {
    auto* cmd = app.add_subcommand("synth-data", "Generate the planted synthetic corpora");
    auto out_dir = std::make_shared<std::string>();
    add_common(cmd, common);
    cmd->add_option("--out-dir", *out_dir, "Output directory")->required();
    cmd->callback([&, out_dir]() {
      action = [&, out_dir]() { return run_synth_data(load_config(common), *out_dir); };
    });
  }
  {
    auto* cmd = app.add_subcommand("train-retriever", "Train one domain's image/text encoder pair");
    auto pairs = std::make_shared<std::string>();
    auto domain = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto eval_pairs = std::make_shared<std::string>();
    auto loss_csv = std::make_shared<std::string>();
    add_common(cmd, common);
    cmd->add_option("--pairs", *pairs, "Training pairs JSONL")->required();
    cmd->add_option("--domain", *domain, "Domain label")->required();
    cmd->add_option("--out", *out, "Output params JSON")->required();
    cmd->add_option("--eval-pairs", *eval_pairs, "Held-out pairs JSONL for recall");
    cmd->add_option("--loss-csv", *loss_csv, "Per-epoch loss CSV");
    cmd->callback([&, pairs, domain, out, eval_pairs, loss_csv]() {
      action = [&, pairs, domain, out, eval_pairs, loss_csv]() {
        return run_train_retriever(load_config(common), *pairs, *domain, *out, *eval_pairs,
                                   *loss_csv);
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("train-router", "Fit the domain identification classifier");
    auto data = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto eval = std::make_shared<std::string>();
    add_common(cmd, common);
    cmd->add_option("--data", *data, "Labeled features JSONL")->required();
    cmd->add_option("--out", *out, "Output router JSON")->required();
    cmd->add_option("--eval", *eval, "Held-out labeled JSONL for accuracy");
    cmd->callback([&, data, out, eval]() {
      action = [&, data, out, eval]() {
        return run_train_router(load_config(common), *data, *out, *eval);
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("build-index", "Encode and store one domain's reports");
    auto domain = std::make_shared<std::string>();
    auto records = std::make_shared<std::string>();
    auto params = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    add_common(cmd, common);
    cmd->add_option("--domain", *domain, "Domain label")->required();
    cmd->add_option("--records", *records, "Records JSONL")->required();
    cmd->add_option("--params", *params, "Encoder params JSON")->required();
    cmd->add_option("--out", *out, "Output index JSON")->required();
    cmd->callback([&, domain, records, params, out]() {
      action = [&, domain, records, params, out]() {
        return run_build_index(load_config(common), *domain, *records, *params, *out);
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("retrieve", "Route an image and fetch its truncated contexts");
    auto image = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    add_common(cmd, common);
    cmd->add_option("--image", *image, "Image feature JSON")->required();
    cmd->add_option("--out", *out, "Optional output JSON path");
    cmd->callback([&, image, out]() {
      action = [&, image, out]() { return run_retrieve(load_config(common), *image, *out); };
    });
  }
  {
    auto* cmd = app.add_subcommand("gen-prefs", "Build the preference dataset from a QA corpus");
    auto qa = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    add_common(cmd, common);
    cmd->add_option("--qa", *qa, "QA JSONL")->required();
    cmd->add_option("--model", *model, "Answer model JSON (scripted or categorical)")->required();
    cmd->add_option("--out", *out, "Output preference JSONL")->required();
    cmd->callback([&, qa, model, out]() {
      action = [&, qa, model, out]() {
        return run_gen_prefs(load_config(common), *qa, *model, *out);
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("train-dpo", "Preference fine-tuning of a categorical policy");
    auto prefs = std::make_shared<std::string>();
    auto policy = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto loss_csv = std::make_shared<std::string>();
    add_common(cmd, common);
    cmd->add_option("--prefs", *prefs, "Preference JSONL")->required();
    cmd->add_option("--policy", *policy, "Initial policy JSON")->required();
    cmd->add_option("--out", *out, "Output trained policy JSON")->required();
    cmd->add_option("--loss-csv", *loss_csv, "Per-epoch loss CSV");
    cmd->callback([&, prefs, policy, out, loss_csv]() {
      action = [&, prefs, policy, out, loss_csv]() {
        return run_train_dpo(load_config(common), *prefs, *policy, *out, *loss_csv);
      };
    });
  }
  {
    auto* cmd = app.add_subcommand("eval", "Score predictions against a gold QA set");
    auto eval_args = std::make_shared<EvalArgs>();
    add_common(cmd, common);
    cmd->add_option("--task", eval_args->task, "vqa or report");
    cmd->add_option("--gold", eval_args->gold_path, "Gold QA JSONL")->required();
    cmd->add_option("--pred", eval_args->pred_path, "Predictions JSONL");
    cmd->add_option("--model", eval_args->model_path, "Answer model to evaluate directly");
    cmd->add_option("--pred-out", eval_args->pred_out, "Persist generated predictions here");
    cmd->add_option("--out", eval_args->out_path, "Output metrics JSON");
    cmd->add_flag("--use-rag", eval_args->use_rag, "Attach retrieved contexts when generating");
    cmd->add_flag("--alignment", eval_args->alignment, "Also report CR/OR alignment rates");
    cmd->callback([&, eval_args]() {
      action = [&, eval_args]() { return run_eval(load_config(common), *eval_args); };
    });
  }
  {
    auto* cmd = app.add_subcommand("diagnose", "Weight-shift report plus threshold constants");
    auto reference = std::make_shared<std::string>();
    auto policy = std::make_shared<std::string>();
    auto input = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    add_common(cmd, common);
    cmd->add_option("--reference", *reference, "Reference policy JSON")->required();
    cmd->add_option("--policy", *policy, "Trained policy JSON")->required();
    cmd->add_option("--input", *input, "Probe input JSON {features: [...]}")->required();
    cmd->add_option("--out", *out, "Output report JSON");
    cmd->callback([&, reference, policy, input, out]() {
      action = [&, reference, policy, input, out]() {
        return run_diagnose(load_config(common), *reference, *policy, *input, *out);
      };
    });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const Error& e) {
    std::cerr << json{{"error", json{{"code", errc_name(e.code())}, {"message", e.what()}}}}.dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", json{{"code", "Unhandled"}, {"message", e.what()}}}}.dump()
              << "\n";
    return 1;
  }
}

}  // namespace cli
}  // namespace ragalign
