#include "driftscope/service/synth.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <random>

#include "driftscope/errors.hpp"

namespace driftscope {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Distributions are spelled out so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

std::vector<double> unit_normal(Rng& rng, std::size_t dims) {
  std::vector<double> w(dims);
  double norm = 0.0;
  while (norm < 1e-9) {
    norm = 0.0;
    for (auto& v : w) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
  }
  for (auto& v : w) v /= norm;
  return w;
}

std::vector<double> orthogonal_to(Rng& rng, const std::vector<double>& previous) {
  if (previous.size() < 2) return {-previous.front()};
  for (;;) {
    auto w = unit_normal(rng, previous.size());
    double dot = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) dot += w[k] * previous[k];
    double norm = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] -= dot * previous[k];
      norm += w[k] * w[k];
    }
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& v : w) v /= norm;
    return w;
  }
}

void append_number(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

std::string synth_source_id(std::size_t source) { return "s" + std::to_string(source); }

void SynthSpec::validate() const {
  if (sources == 0) throw InvalidArgument("synth needs at least one source");
  if (dims == 0) throw InvalidArgument("synth needs at least one attribute");
  if (records_per_segment == 0) throw InvalidArgument("records per segment must be positive");
  if (unit <= 0) throw InvalidArgument("unit must be positive");
  if (!(noise >= 0.0 && noise <= 1.0)) throw InvalidArgument("noise must lie in [0, 1]");
  // a unit normal reaches at least 1/2 from the centre at some corner
  if (!(margin >= 0.0 && margin < 0.25)) throw InvalidArgument("margin must lie in [0, 0.25)");
  std::size_t previous = 0;
  for (std::size_t s : switches) {
    if (s == 0 || s >= records_per_source) throw InvalidArgument("switch points must lie inside the stream");
    if (s <= previous) throw InvalidArgument("switch points must be strictly increasing");
    previous = s;
  }
}

std::size_t synth_phase(const SynthSpec& spec, std::size_t source, std::size_t index) noexcept {
  const std::size_t lag = spec.lag_of(source) * spec.records_per_segment;
  std::size_t phase = 0;
  for (std::size_t s : spec.switches) {
    if (index >= s + lag) ++phase;
  }
  return phase;
}

SynthStream synth_stream(const SynthSpec& spec) {
  spec.validate();
  SynthStream out;

  Rng concept_rng(spec.seed);
  out.phase_weights.push_back(unit_normal(concept_rng, spec.dims));
  for (std::size_t k = 0; k < spec.switches.size(); ++k) {
    out.phase_weights.push_back(orthogonal_to(concept_rng, out.phase_weights.back()));
  }
  for (const auto& w : out.phase_weights) {
    double b = 0.0;
    for (double v : w) b -= 0.5 * v;
    out.phase_biases.push_back(b);
  }

  auto& schema = out.manifest.schema;
  for (std::size_t k = 0; k < spec.dims; ++k) schema.attribute_names.push_back("a" + std::to_string(k));
  schema.label_name = "label";
  for (std::size_t s = 0; s < spec.sources; ++s) {
    schema.sources.push_back({synth_source_id(s), "Source " + std::to_string(s)});
  }
  schema.unit = spec.unit;
  schema.span_start = spec.start;
  const auto segments =
      static_cast<EpochSeconds>((spec.records_per_source + spec.records_per_segment - 1) / spec.records_per_segment);
  schema.span_end = spec.start + std::max<EpochSeconds>(segments, 1) * spec.unit;

  std::string& csv = out.csv;
  csv = "timestamp,source,label";
  for (const auto& name : schema.attribute_names) csv += "," + name;
  csv += '\n';

  std::vector<double> x(spec.dims);
  for (std::size_t s = 0; s < spec.sources; ++s) {
    Rng rng(spec.seed * 1000003ULL + s + 1);
    const std::string id = synth_source_id(s);
    for (std::size_t i = 0; i < spec.records_per_source; ++i) {
      const std::size_t phase = synth_phase(spec, s, i);
      const auto& w = out.phase_weights[phase];
      double z = 0.0;
      do {
        for (auto& v : x) v = rng.uniform();
        z = out.phase_biases[phase];
        for (std::size_t k = 0; k < spec.dims; ++k) z += w[k] * x[k];
      } while (std::abs(z) < spec.margin);
      int y = z > 0.0 ? 1 : 0;
      if (rng.uniform() < spec.noise) y = 1 - y;

      const auto offset = static_cast<EpochSeconds>(i) * spec.unit / static_cast<EpochSeconds>(spec.records_per_segment);
      csv += std::to_string(spec.start + offset);
      csv += ',';
      csv += id;
      csv += ',';
      csv += y == 1 ? '1' : '0';
      for (double v : x) {
        csv += ',';
        append_number(csv, v);
      }
      csv += '\n';
    }
  }
  return out;
}

}  // namespace driftscope
