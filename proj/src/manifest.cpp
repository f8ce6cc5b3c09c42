#include "rulkit/manifest.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "rulkit/textio.hpp"

namespace rulkit::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw std::runtime_error("manifest: " + field + ": " + what);
}

template <typename T>
T get_or(const json& j, const std::string& field, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(field + "." + key, e.what());
  }
}

const json* child(const json& j, const char* key) {
  if (!j.contains(key)) return nullptr;
  return &j.at(key);
}

void parse_synth(const json& j, dataset::SynthesisSpec& spec) {
  spec.run_count = get_or<std::size_t>(j, "data.synth", "runs", spec.run_count);
  spec.windows_per_run = get_or<std::size_t>(j, "data.synth", "windows_per_run", spec.windows_per_run);
  spec.window_length = get_or<std::size_t>(j, "data.synth", "window_length", spec.window_length);
  spec.sample_rate = get_or<double>(j, "data.synth", "sample_rate", spec.sample_rate);
  spec.weibull_beta = get_or<double>(j, "data.synth", "weibull_beta", spec.weibull_beta);
  spec.weibull_eta = get_or<double>(j, "data.synth", "weibull_eta", spec.weibull_eta);
  spec.horizon = get_or<double>(j, "data.synth", "horizon", spec.horizon);
  spec.onset_fraction = get_or<double>(j, "data.synth", "onset_fraction", spec.onset_fraction);
  spec.noise_level = get_or<double>(j, "data.synth", "noise_level", spec.noise_level);
  spec.base_amplitude = get_or<double>(j, "data.synth", "base_amplitude", spec.base_amplitude);
  spec.drift_gain = get_or<double>(j, "data.synth", "drift_gain", spec.drift_gain);
  spec.fault_gain = get_or<double>(j, "data.synth", "fault_gain", spec.fault_gain);
  spec.base_freq = get_or<double>(j, "data.synth", "base_freq", spec.base_freq);
  spec.drift_freq = get_or<double>(j, "data.synth", "drift_freq", spec.drift_freq);
  spec.fault_freq = get_or<double>(j, "data.synth", "fault_freq", spec.fault_freq);
}

void parse_space(const json& j, search::SearchSpace& space) {
  space.batch_sizes = get_or(j, "search.space", "batch_sizes", space.batch_sizes);
  space.learning_rates = get_or(j, "search.space", "learning_rates", space.learning_rates);
  space.lambda_min = get_or(j, "search.space", "lambda_min", space.lambda_min);
  space.lambda_max = get_or(j, "search.space", "lambda_max", space.lambda_max);
  space.min_hidden_layers = get_or(j, "search.space", "min_hidden_layers", space.min_hidden_layers);
  space.max_hidden_layers = get_or(j, "search.space", "max_hidden_layers", space.max_hidden_layers);
  space.units = get_or(j, "search.space", "units", space.units);
  space.dropout = get_or(j, "search.space", "dropout", space.dropout);
  space.lambda_per_trial = get_or(j, "search.space", "lambda_per_trial", space.lambda_per_trial);
}

json space_to_json(const search::SearchSpace& s) {
  return json{{"batch_sizes", s.batch_sizes},
              {"learning_rates", s.learning_rates},
              {"lambda_min", s.lambda_min},
              {"lambda_max", s.lambda_max},
              {"min_hidden_layers", s.min_hidden_layers},
              {"max_hidden_layers", s.max_hidden_layers},
              {"units", s.units},
              {"dropout", s.dropout},
              {"lambda_per_trial", s.lambda_per_trial}};
}

json synth_to_json(const dataset::SynthesisSpec& s) {
  return json{{"runs", s.run_count},
              {"windows_per_run", s.windows_per_run},
              {"window_length", s.window_length},
              {"sample_rate", s.sample_rate},
              {"weibull_beta", s.weibull_beta},
              {"weibull_eta", s.weibull_eta},
              {"horizon", s.horizon},
              {"onset_fraction", s.onset_fraction},
              {"noise_level", s.noise_level},
              {"base_amplitude", s.base_amplitude},
              {"drift_gain", s.drift_gain},
              {"fault_gain", s.fault_gain},
              {"base_freq", s.base_freq},
              {"drift_freq", s.drift_freq},
              {"fault_freq", s.fault_freq}};
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest: " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("manifest: top level must be an object");

  Manifest m;
  m.out_dir = get_or<std::string>(j, "", "out_dir", m.out_dir);
  m.seed = get_or<std::uint64_t>(j, "", "seed", m.seed);

  if (const json* features = child(j, "features")) {
    m.bin_count = get_or<std::size_t>(*features, "features", "bin_count", m.bin_count);
    m.kaiser_shape = get_or<double>(*features, "features", "kaiser_shape", m.kaiser_shape);
  }
  if (m.bin_count == 0) fail("features.bin_count", "must be positive");
  if (!(m.kaiser_shape >= 0.0)) fail("features.kaiser_shape", "must be >= 0");

  if (const json* weibull = child(j, "weibull"))
    m.beta = get_or<double>(*weibull, "weibull", "beta", m.beta);
  if (!(m.beta > 0.0)) fail("weibull.beta", "must be positive");

  if (const json* data = child(j, "data")) {
    const std::string mode = get_or<std::string>(*data, "data", "mode", "synth");
    if (mode == "synth") m.mode = DataMode::synth;
    else if (mode == "real") m.mode = DataMode::real;
    else fail("data.mode", "must be 'synth' or 'real', got '" + mode + "'");

    if (const json* synth = child(*data, "synth")) parse_synth(*synth, m.synth);
    if (data->contains("split_counts")) {
      const auto counts = data->at("split_counts").get<std::vector<std::size_t>>();
      if (counts.size() != 3) fail("data.split_counts", "must have exactly three entries");
      m.split_counts = {counts[0], counts[1], counts[2]};
    }
    if (const json* runs = child(*data, "runs")) {
      if (!runs->is_array()) fail("data.runs", "must be an array");
      for (std::size_t i = 0; i < runs->size(); ++i) {
        const json& rj = runs->at(i);
        const std::string field = "data.runs[" + std::to_string(i) + "]";
        RunSource src;
        src.id = get_or<std::string>(rj, field, "id", "");
        if (src.id.empty()) fail(field + ".id", "is required");
        src.path = get_or<std::string>(rj, field, "path", "");
        if (src.path.empty()) fail(field + ".path", "is required");
        const std::string format = get_or<std::string>(rj, field, "format", "ims");
        if (format == "ims") src.format = dataset::IngestFormat::ims;
        else if (format == "pronostia") src.format = dataset::IngestFormat::pronostia;
        else fail(field + ".format", "must be 'ims' or 'pronostia', got '" + format + "'");
        src.channel = get_or<std::size_t>(rj, field, "channel",
                                          src.format == dataset::IngestFormat::pronostia ? 4u : 0u);
        src.sample_rate = get_or<double>(
            rj, field, "sample_rate",
            src.format == dataset::IngestFormat::pronostia ? 25600.0 : 20480.0);
        const std::string split = get_or<std::string>(rj, field, "split", "train");
        const auto parsed = dataset::split_from_name(split);
        if (!parsed) fail(field + ".split", "must be train/validation/test, got '" + split + "'");
        src.split = *parsed;
        src.failed = get_or<bool>(rj, field, "failed", true);
        m.runs.push_back(std::move(src));
      }
    }
  }
  if (m.mode == DataMode::real && m.runs.empty())
    fail("data.runs", "real mode needs at least one run source");
  const std::size_t split_total = m.split_counts[0] + m.split_counts[1] + m.split_counts[2];
  if (m.mode == DataMode::synth && split_total != m.synth.run_count)
    fail("data.split_counts",
         "entries sum to " + std::to_string(split_total) + " but data.synth.runs is " +
             std::to_string(m.synth.run_count));

  if (const json* train = child(j, "train")) {
    m.train.batch_size = get_or<std::size_t>(*train, "train", "batch_size", m.train.batch_size);
    m.train.learning_rate = get_or<double>(*train, "train", "learning_rate", m.train.learning_rate);
    m.train.max_epochs = get_or<std::size_t>(*train, "train", "max_epochs", m.train.max_epochs);
    m.train.patience = get_or<std::size_t>(*train, "train", "patience", m.train.patience);
    m.train.loss = get_or<std::string>(*train, "train", "loss", m.train.loss);
    m.train.lambda = get_or<double>(*train, "train", "lambda", m.train.lambda);
    m.train.hidden_layers = get_or<std::size_t>(*train, "train", "hidden_layers", m.train.hidden_layers);
    m.train.units = get_or<std::size_t>(*train, "train", "units", m.train.units);
    m.train.dropout = get_or<double>(*train, "train", "dropout", m.train.dropout);
    m.train.seed = get_or<std::uint64_t>(*train, "train", "seed", m.seed);
  } else {
    m.train.seed = m.seed;
  }
  if (!losses::loss_kind_from_name(m.train.loss))
    fail("train.loss", "unknown loss kind '" + m.train.loss + "'");

  if (const json* search_j = child(j, "search")) {
    m.search.architectures =
        get_or<std::size_t>(*search_j, "search", "architectures", m.search.architectures);
    m.search.max_epochs = get_or<std::size_t>(*search_j, "search", "max_epochs", m.search.max_epochs);
    m.search.patience = get_or<std::size_t>(*search_j, "search", "patience", m.search.patience);
    if (const json* space = child(*search_j, "space")) parse_space(*space, m.search.space);
  }
  search::validate_space(m.search.space);

  if (const json* filter = child(j, "filter")) {
    m.filter.r2_min = get_or<double>(*filter, "filter", "r2_min", m.filter.r2_min);
    m.filter.rmse_max = get_or<double>(*filter, "filter", "rmse_max", m.filter.rmse_max);
  }
  return m;
}

std::uint64_t manifest_hash(const Manifest& m) {
  json j;
  j["seed"] = m.seed;
  j["features"] = {{"bin_count", m.bin_count}, {"kaiser_shape", m.kaiser_shape}};
  j["weibull"] = {{"beta", m.beta}};
  j["data"]["mode"] = m.mode == DataMode::synth ? "synth" : "real";
  if (m.mode == DataMode::synth) {
    j["data"]["synth"] = synth_to_json(m.synth);
    j["data"]["split_counts"] = {m.split_counts[0], m.split_counts[1], m.split_counts[2]};
  } else {
    json runs = json::array();
    for (const RunSource& src : m.runs) {
      runs.push_back({{"id", src.id},
                      {"path", src.path},
                      {"format", src.format == dataset::IngestFormat::ims ? "ims" : "pronostia"},
                      {"channel", src.channel},
                      {"sample_rate", src.sample_rate},
                      {"split", std::string(dataset::split_name(src.split))},
                      {"failed", src.failed}});
    }
    j["data"]["runs"] = std::move(runs);
  }
  j["train"] = {{"batch_size", m.train.batch_size},
                {"learning_rate", m.train.learning_rate},
                {"max_epochs", m.train.max_epochs},
                {"patience", m.train.patience},
                {"loss", m.train.loss},
                {"lambda", m.train.lambda},
                {"hidden_layers", m.train.hidden_layers},
                {"units", m.train.units},
                {"dropout", m.train.dropout},
                {"seed", m.train.seed}};
  j["search"] = {{"architectures", m.search.architectures},
                 {"max_epochs", m.search.max_epochs},
                 {"patience", m.search.patience},
                 {"space", space_to_json(m.search.space)}};
  j["filter"] = {{"r2_min", m.filter.r2_min}, {"rmse_max", m.filter.rmse_max}};
  // nlohmann objects iterate in key order, so dump() is canonical.
  return fnv1a64(j.dump());
}

}  // namespace rulkit::cli
