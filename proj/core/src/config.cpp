#include "speckle/config.hpp"

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "speckle/errors.hpp"
#include "speckle/tensor_io.hpp"

namespace speckle {
namespace {

namespace pt = boost::property_tree;

// Binds every key of every section to a field, for both parsing and
// canonical serialization.
struct Field {
  std::function<void(const std::string&)> parse;
  std::function<std::string()> print;
};
using Section = std::vector<std::pair<std::string, Field>>;
using Schema = std::vector<std::pair<std::string, Section>>;

template <typename T>
T parse_number(const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (!in || !(in >> std::ws).eof()) throw ConfigError("malformed number '" + text + "'");
  return value;
}

Field int_field(int& v) {
  return {[&v](const std::string& s) { v = parse_number<int>(s); }, [&v] { return std::to_string(v); }};
}
Field u64_field(std::uint64_t& v) {
  return {[&v](const std::string& s) {
            if (!s.empty() && s.front() == '-') throw ConfigError("seed must be nonnegative");
            v = parse_number<std::uint64_t>(s);
          },
          [&v] { return std::to_string(v); }};
}
Field real_field(double& v) {
  return {[&v](const std::string& s) { v = parse_number<double>(s); }, [&v] { return format_number(v); }};
}
Field bool_field(bool& v) {
  return {[&v](const std::string& s) {
            if (s == "true" || s == "1" || s == "yes") {
              v = true;
            } else if (s == "false" || s == "0" || s == "no") {
              v = false;
            } else {
              throw ConfigError("malformed boolean '" + s + "'");
            }
          },
          [&v] { return std::string(v ? "true" : "false"); }};
}
Field shift_mode_field(ShiftMode& v) {
  return {[&v](const std::string& s) {
            try {
              v = parse_shift_mode(s);
            } catch (const std::invalid_argument& e) {
              throw ConfigError(e.what());
            }
          },
          [&v] { return std::string(to_string(v)); }};
}
Field reference_field(ReferenceFrame& v) {
  return {[&v](const std::string& s) {
            try {
              v = parse_reference_frame(s);
            } catch (const std::invalid_argument& e) {
              throw ConfigError(e.what());
            }
          },
          [&v] { return std::string(v == ReferenceFrame::first ? "first" : "median"); }};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

Field int_list_field(std::vector<int>& v) {
  return {[&v](const std::string& s) {
            v.clear();
            for (const auto& item : split_list(s)) v.push_back(parse_number<int>(item));
          },
          [&v] {
            std::string out;
            for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
            return out;
          }};
}
Field string_list_field(std::vector<std::string>& v) {
  return {[&v](const std::string& s) { v = split_list(s); },
          [&v] {
            std::string out;
            for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
            return out;
          }};
}

Schema schema(PipelineConfig& c) {
  auto& p = c.phantom;
  auto& r = c.registration;
  auto& k = c.contrast;
  auto& d = c.diffusion;
  return {
      {"phantom",
       {{"count", int_field(p.count)},
        {"height", int_field(p.height)},
        {"width", int_field(p.width)},
        {"n_frames", int_field(p.n_frames)},
        {"base_intensity", real_field(p.base_intensity)},
        {"background_k", real_field(p.background_k)},
        {"texture", real_field(p.texture)},
        {"additive_noise", real_field(p.additive_noise)},
        {"max_shift", int_field(p.max_shift)},
        {"shift_mode", shift_mode_field(p.shift_mode)},
        {"vessels_min", int_field(p.vessels.min_count)},
        {"vessels_max", int_field(p.vessels.max_count)},
        {"radius_min", real_field(p.vessels.min_radius)},
        {"radius_max", real_field(p.vessels.max_radius)},
        {"vessel_k_min", real_field(p.vessels.min_k)},
        {"vessel_k_max", real_field(p.vessels.max_k)},
        {"vessel_mu_scale", real_field(p.vessels.mu_scale)}}},
      {"registration",
       {{"eps", real_field(r.eps)},
        {"mode", shift_mode_field(r.mode)},
        {"confidence_threshold", real_field(r.confidence_threshold)},
        {"reference", reference_field(r.reference)}}},
      {"contrast",
       {{"contrast_eps", real_field(k.contrast_eps)},
        {"flow_eps", real_field(k.flow_eps)},
        {"lo_pct", real_field(k.lo_pct)},
        {"hi_pct", real_field(k.hi_pct)},
        {"n_few", int_field(k.n_few)},
        {"n_hq", int_field(k.n_hq)}}},
      {"diffusion",
       {{"steps", int_field(d.steps)},
        {"beta_start", real_field(d.beta_start)},
        {"beta_end", real_field(d.beta_end)},
        {"hidden", int_list_field(d.hidden)},
        {"kernel", int_field(d.kernel)},
        {"time_dim", int_field(d.time_dim)},
        {"train_steps", int_field(d.train_steps)},
        {"batch_size", int_field(d.batch_size)},
        {"learning_rate", real_field(d.learning_rate)},
        {"weight_decay", real_field(d.weight_decay)},
        {"augment", bool_field(d.augment)},
        {"sampler_steps", int_field(d.sampler_steps)}}},
      {"evaluation",
       {{"metrics", string_list_field(c.evaluation.metrics)}, {"export_png", bool_field(c.evaluation.export_png)}}},
      {"seeds",
       {{"phantom", u64_field(c.seeds.phantom)},
        {"train", u64_field(c.seeds.train)},
        {"sample", u64_field(c.seeds.sample)}}},
  };
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void PipelineConfig::validate() const {
  const auto& p = phantom;
  require(p.count >= 1, "phantom.count must be at least 1");
  require(p.height >= 2 && p.width >= 2 && p.height % 2 == 0 && p.width % 2 == 0,
          "phantom dimensions must be even and at least 2");
  require(p.n_frames >= 2, "phantom.n_frames must be at least 2");
  require(p.base_intensity > 0.0, "phantom.base_intensity must be positive");
  require(p.background_k > 0.0 && p.background_k <= kMaxPhantomContrast, "phantom.background_k must lie in (0, 0.35]");
  require(p.texture >= 0.0 && p.texture < 1.0, "phantom.texture must lie in [0, 1)");
  require(p.additive_noise >= 0.0, "phantom.additive_noise must be nonnegative");
  require(p.max_shift >= 0 && 2 * p.max_shift < std::min(p.height, p.width), "phantom.max_shift exceeds half the frame");
  require(p.vessels.min_count >= 0 && p.vessels.max_count >= p.vessels.min_count, "invalid vessel count range");
  require(p.vessels.min_radius >= 0.0 && p.vessels.max_radius >= p.vessels.min_radius, "invalid vessel radius range");
  require(p.vessels.min_k > 0.0 && p.vessels.min_k <= p.vessels.max_k && p.vessels.max_k <= kMaxPhantomContrast,
          "vessel contrast range must lie in (0, 0.35]");
  require(p.vessels.mu_scale > 0.0, "phantom.vessel_mu_scale must be positive");

  require(registration.eps > 0.0, "registration.eps must be positive");
  require(registration.confidence_threshold >= 0.0, "registration.confidence_threshold must be nonnegative");

  const auto& k = contrast;
  require(k.contrast_eps > 0.0 && k.flow_eps > 0.0, "contrast eps values must be positive");
  require(0.0 <= k.lo_pct && k.lo_pct < k.hi_pct && k.hi_pct <= 100.0, "contrast percentiles must satisfy 0 <= lo < hi <= 100");
  require(k.n_few >= 2, "contrast.n_few must be at least 2 (the prior needs temporal statistics)");
  require(k.n_hq >= 2 && k.n_hq <= p.n_frames, "contrast.n_hq must lie in [2, phantom.n_frames]");
  require(k.n_few <= p.n_frames, "contrast.n_few exceeds phantom.n_frames");

  const auto& d = diffusion;
  require(d.steps >= 1, "diffusion.steps must be at least 1");
  require(d.beta_start > 0.0 && d.beta_start <= d.beta_end && d.beta_end < 1.0,
          "diffusion betas must satisfy 0 < beta_start <= beta_end < 1");
  require(!d.hidden.empty(), "diffusion.hidden needs at least one layer");
  for (int h : d.hidden) require(h >= 1, "diffusion.hidden widths must be positive");
  require(d.kernel >= 1 && d.kernel % 2 == 1, "diffusion.kernel must be odd");
  require(d.time_dim >= 2 && d.time_dim % 2 == 0, "diffusion.time_dim must be even");
  require(d.train_steps >= 0, "diffusion.train_steps must be nonnegative");
  require(d.batch_size >= 1, "diffusion.batch_size must be positive");
  require(d.learning_rate >= 0.0 && d.weight_decay >= 0.0, "learning rate and weight decay must be nonnegative");
  require(d.sampler_steps >= 1 && d.sampler_steps <= d.steps, "diffusion.sampler_steps must lie in [1, steps]");

  for (const auto& m : evaluation.metrics) {
    require(m == "ssim" || m == "psnr" || m == "mae", "unknown evaluation metric '" + m + "'");
  }
  require(std::min(p.height, p.width) >= 11 || std::find(evaluation.metrics.begin(), evaluation.metrics.end(), "ssim") ==
                                                   evaluation.metrics.end(),
          "SSIM needs frames of at least 11x11");
}

std::string PipelineConfig::canonical_text() const {
  PipelineConfig copy = *this;
  std::string out;
  for (auto& [name, section] : schema(copy)) {
    out += "[" + name + "]\n";
    for (auto& [key, field] : section) out += key + " = " + field.print() + "\n";
  }
  return out;
}

std::string PipelineConfig::hash() const { return sha256_hex(canonical_text()); }

void PipelineConfig::override_seeds(std::uint64_t seed) {
  seeds.phantom = seed;
  seeds.train = seed + 1;
  seeds.sample = seed + 2;
}

PipelineConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  // The INI reader drops sections without keys, so headers are collected separately.
  std::set<std::string> declared;
  const std::regex header(R"(^\s*\[([^\]]+)\]\s*$)");
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    std::smatch m;
    if (std::regex_match(line, m, header)) declared.insert(m[1].str());
  }
  PipelineConfig cfg;
  auto bindings = schema(cfg);
  std::set<std::string> known;
  const pt::ptree empty;
  for (auto& [name, section] : bindings) {
    known.insert(name);
    if (!declared.count(name)) throw ConfigError("config is missing section [" + name + "]");
    const auto child = tree.get_child_optional(name);
    const pt::ptree* node = child ? &*child : &empty;
    std::map<std::string, Field*> fields;
    for (auto& [key, field] : section) fields[key] = &field;
    for (const auto& [key, value] : *node) {
      const auto it = fields.find(key);
      if (it == fields.end()) throw ConfigError("unknown key '" + key + "' in section [" + name + "]");
      try {
        it->second->parse(value.get_value<std::string>());
      } catch (const ConfigError& e) {
        throw ConfigError("[" + name + "] " + key + ": " + e.what());
      }
    }
  }
  for (const auto& [name, node] : tree) {
    if (!known.count(name)) throw ConfigError("unknown config section or stray key '" + name + "'");
  }
  for (const auto& name : declared) {
    if (!known.count(name)) throw ConfigError("unknown config section [" + name + "]");
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

}  // namespace speckle
