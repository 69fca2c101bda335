#include "dcs/io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace dcs {

using nlohmann::json;

namespace {

template <typename F>
auto parse_json(const std::string& text, const char* what, F&& build) {
  try {
    return build(json::parse(text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

json channel_to_json(const Channel& w) {
  json rows = json::array();
  for (std::size_t i = 0; i < w.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < w.cols(); ++j) row.push_back(w(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Channel channel_from_json(const json& rows) {
  const std::size_t r = rows.size();
  if (r == 0) throw ValidationError("channel has no rows");
  const std::size_t c = rows.at(0).size();
  std::vector<double> e;
  e.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ValidationError("channel rows have different lengths");
    for (const auto& v : row) e.push_back(v.get<double>());
  }
  return Channel(r, c, std::move(e));
}

json system_to_json(const DCSystem& s) {
  json channels = json::array();
  for (const auto& w : s.channels()) channels.push_back(channel_to_json(w));
  return {{"L", s.hidden_size()},
          {"Lprime", s.output_size()},
          {"K", s.agents()},
          {"p", s.p().vector()},
          {"channels", std::move(channels)}};
}

DCSystem system_from_json(const json& j) {
  Distribution p(j.at("p").get<std::vector<double>>());
  std::vector<Channel> channels;
  for (const auto& c : j.at("channels")) channels.push_back(channel_from_json(c));
  DCSystem s(std::move(p), std::move(channels));
  if (j.contains("L") && j.at("L").get<std::size_t>() != s.hidden_size()) {
    throw ValidationError("system: L does not match p");
  }
  if (j.contains("Lprime") && j.at("Lprime").get<std::size_t>() != s.output_size()) {
    throw ValidationError("system: Lprime does not match the channels");
  }
  if (j.contains("K") && j.at("K").get<std::size_t>() != s.agents()) {
    throw ValidationError("system: K does not match the number of channels");
  }
  return s;
}

}  // namespace

std::string system_to_string(const DCSystem& system) { return system_to_json(system).dump(2) + "\n"; }

DCSystem system_from_string(const std::string& text) {
  return parse_json(text, "system file", system_from_json);
}

std::string samples_to_string(const SampleBatch& batch) {
  std::string out = "t";
  for (std::size_t k = 1; k <= batch.agents(); ++k) out += ",y" + std::to_string(k);
  out += '\n';
  for (std::size_t t = 0; t < batch.records(); ++t) {
    out += std::to_string(t + 1);
    for (auto s : batch.record(t)) {
      out += ',';
      out += std::to_string(s + 1);
    }
    out += '\n';
  }
  return out;
}

SampleBatch samples_from_string(const std::string& text, std::optional<std::size_t> output_size) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("sample file: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::size_t agents = 0;
  {
    std::istringstream header(line);
    std::string field;
    std::size_t col = 0;
    while (std::getline(header, field, ',')) {
      const std::string expected = col == 0 ? "t" : "y" + std::to_string(col);
      if (field != expected) throw ValidationError("sample file: bad header field '" + field + "'");
      ++col;
    }
    if (col < 2) throw ValidationError("sample file: header needs t and at least y1");
    agents = col - 1;
  }

  auto parse_uint = [](std::string_view s, const char* what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ValidationError(std::string("sample file: bad ") + what + " '" + std::string(s) + "'");
    }
    return v;
  };

  std::vector<std::uint32_t> symbols;
  std::uint64_t expected_t = 1;
  std::uint32_t largest = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view rest(line);
    std::size_t col = 0;
    while (true) {
      const auto comma = rest.find(',');
      const auto field = rest.substr(0, comma);
      if (col == 0) {
        if (parse_uint(field, "t") != expected_t) {
          throw ValidationError("sample file: t must increase by one from 1");
        }
      } else {
        const auto v = parse_uint(field, "symbol");
        if (v < 1 || (output_size && v > *output_size)) {
          throw ValidationError("sample file: symbol " + std::to_string(v) + " out of range");
        }
        symbols.push_back(static_cast<std::uint32_t>(v - 1));
        largest = std::max(largest, static_cast<std::uint32_t>(v));
      }
      ++col;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (col != agents + 1) throw ValidationError("sample file: row has wrong number of fields");
    ++expected_t;
  }
  if (symbols.empty()) throw ValidationError("sample file: no observations");
  return SampleBatch(agents, output_size.value_or(largest), std::move(symbols));
}

std::string tensor_to_string(const JointTensor& t) {
  return json{{"shape", t.shape()}, {"values", t.vector()}}.dump(2) + "\n";
}

JointTensor tensor_from_string(const std::string& text) {
  return parse_json(text, "tensor file", [](const json& j) {
    return JointTensor(j.at("shape").get<std::vector<std::size_t>>(),
                       j.at("values").get<std::vector<double>>());
  });
}

std::string result_to_string(const ResultDocument& doc) {
  const auto& r = doc.result;
  const auto& c = doc.config;
  json channels = json::array();
  for (const auto& w : r.channels_hat()) channels.push_back(channel_to_json(w));
  json restarts = json::array();
  for (const auto& log : r.restarts) {
    restarts.push_back(
        {{"objective", log.objective}, {"iterations", log.iterations}, {"converged", log.converged}});
  }
  json j = {
      {"version", doc.version},
      {"p_hat", r.p_hat().vector()},
      {"channels_hat", std::move(channels)},
      {"objective", r.objective_value},
      {"converged", r.converged},
      {"near_boundary", r.near_boundary},
      {"best_restart", r.best_restart},
      {"seed", c.seed},
      {"config",
       {{"L", c.hidden_size},
        {"objective", std::string(to_string(c.objective))},
        {"restarts", c.restarts},
        {"max_iters", c.max_iters},
        {"step_tol", c.step_tol},
        {"objective_tol", c.objective_tol},
        {"kl_smoothing", c.kl_smoothing}}},
      {"restart_log", std::move(restarts)},
      {"warnings", r.warnings},
  };
  return j.dump(2) + "\n";
}

ResultDocument result_from_string(const std::string& text) {
  return parse_json(text, "result file", [](const json& j) {
    const auto& jc = j.at("config");
    InversionConfig c;
    c.hidden_size = jc.at("L").get<std::size_t>();
    const auto kind = parse_objective(jc.at("objective").get<std::string>());
    if (!kind) throw ValidationError("result file: unknown objective");
    c.objective = *kind;
    c.restarts = jc.at("restarts").get<std::size_t>();
    c.max_iters = jc.at("max_iters").get<std::size_t>();
    c.step_tol = jc.at("step_tol").get<double>();
    c.objective_tol = jc.at("objective_tol").get<double>();
    c.kl_smoothing = jc.at("kl_smoothing").get<double>();
    c.seed = j.at("seed").get<Seed>();

    std::vector<Channel> channels;
    for (const auto& w : j.at("channels_hat")) channels.push_back(channel_from_json(w));
    InversionResult r{.system = DCSystem(Distribution(j.at("p_hat").get<std::vector<double>>()),
                               std::move(channels))};
    r.objective_value = j.at("objective").get<double>();
    r.converged = j.at("converged").get<bool>();
    r.near_boundary = j.at("near_boundary").get<bool>();
    r.best_restart = j.at("best_restart").get<std::size_t>();
    for (const auto& log : j.at("restart_log")) {
      r.restarts.push_back({log.at("objective").get<double>(), log.at("iterations").get<std::size_t>(),
                            log.at("converged").get<bool>()});
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return ResultDocument{std::move(r), c, j.at("version").get<std::string>()};
  });
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot replace " + path.string());
  }
}

}  // namespace dcs
