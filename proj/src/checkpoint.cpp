#include "mitonet/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace mito {
namespace {

constexpr const char* kMagic = "mitonet-checkpoint";

void put_floats(std::string& out, std::span<const float> values) {
  for (float f : values) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xFF));
  }
}

void get_floats(const char* src, std::span<float> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(src + 4 * i);
    const std::uint32_t u = p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t{p[3]} << 24);
    values[i] = std::bit_cast<float>(u);
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void reject(const fs::path& path, const std::string& why) {
  fail(ErrorCategory::format, path.string() + ": " + why);
}

struct TensorEntry {
  std::string name;
  Shape shape;
  std::int64_t adam_step;
};

}  // namespace

void save_checkpoint(const fs::path& path, const UNet& model, const TrainState* state) {
  const auto& cfg = model.config();
  std::ostringstream h;
  h << kMagic << ' ' << kCheckpointVersion << '\n';
  h << "filters";
  for (int f : cfg.filters) h << ' ' << f;
  h << "\ninput_size " << cfg.input_size << "\ndropout " << format_double(cfg.dropout) << '\n';
  const auto& hyper = model.convs().front().weight_state.hyper;
  h << "adam " << format_double(hyper.learning_rate) << ' ' << format_double(hyper.beta1) << ' '
    << format_double(hyper.beta2) << ' ' << format_double(hyper.epsilon) << '\n';
  if (state) h << "train_step " << state->step << "\ntrain_rng " << state->rng.state() << '\n';

  std::string payload;
  auto add = [&](const std::string& name, const Tensor& t, const AdamState<float>& s) {
    h << "tensor " << name << " f32 " << t.rank();
    for (int d : t.shape()) h << ' ' << d;
    h << ' ' << s.step << '\n';
    put_floats(payload, t.values());
    std::vector<float> zeros;
    const auto moment = [&](const std::vector<float>& m) -> std::span<const float> {
      if (m.size() == t.size()) return m;
      zeros.assign(t.size(), 0.0f);
      return zeros;
    };
    put_floats(payload, moment(s.first_moment));
    put_floats(payload, moment(s.second_moment));
  };
  for (const auto& c : model.convs()) {
    add(c.name + ".weight", c.weight, c.weight_state);
    add(c.name + ".bias", c.bias, c.bias_state);
  }
  h << "end\n";

  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot write " + tmp.string());
    const auto header = h.str();
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) fail(ErrorCategory::io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) reject(path, "truncated header");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };

  {
    std::istringstream first(next_line());
    std::string magic;
    int version = 0;
    if (!(first >> magic >> version) || magic != kMagic) reject(path, "not a mitonet checkpoint");
    if (version != kCheckpointVersion)
      reject(path, "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }

  UNetConfig cfg;
  AdamHyper hyper;
  std::optional<std::int64_t> step;
  std::optional<std::string> rng_state;
  std::vector<TensorEntry> entries;
  bool have_filters = false, have_size = false;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end") break;
    bool ok = true;
    if (key == "filters") {
      cfg.filters.clear();
      for (int f; ls >> f;) cfg.filters.push_back(f);
      have_filters = true;
    } else if (key == "input_size") {
      ok = static_cast<bool>(ls >> cfg.input_size);
      have_size = true;
    } else if (key == "dropout") {
      ok = static_cast<bool>(ls >> cfg.dropout);
    } else if (key == "adam") {
      ok = static_cast<bool>(ls >> hyper.learning_rate >> hyper.beta1 >> hyper.beta2 >> hyper.epsilon);
    } else if (key == "train_step") {
      std::int64_t s = 0;
      ok = static_cast<bool>(ls >> s);
      step = s;
    } else if (key == "train_rng") {
      std::string rest;
      std::getline(ls, rest);
      rng_state = rest;
    } else if (key == "tensor") {
      TensorEntry e;
      std::string dtype;
      int rank = 0;
      ok = static_cast<bool>(ls >> e.name >> dtype >> rank);
      if (ok && dtype != "f32") reject(path, "tensor " + e.name + " has unsupported dtype " + dtype);
      for (int i = 0; ok && i < rank; ++i) {
        int d = 0;
        ok = static_cast<bool>(ls >> d);
        e.shape.push_back(d);
      }
      ok = ok && static_cast<bool>(ls >> e.adam_step);
      entries.push_back(std::move(e));
    } else {
      reject(path, "unknown header key '" + key + "'");
    }
    if (!ok) reject(path, "malformed header line '" + line + "'");
  }
  if (!have_filters || !have_size) reject(path, "header lacks the model configuration");
  try {
    cfg.validate();
  } catch (const Error& e) {
    reject(path, e.what());
  }

  Checkpoint ck{UNet(cfg, 0), std::nullopt};
  auto& convs = ck.model.convs();
  if (entries.size() != 2 * convs.size())
    reject(path, "expected " + std::to_string(2 * convs.size()) + " tensors, found " +
                     std::to_string(entries.size()));

  std::size_t expected = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& c = convs[i / 2];
    const Tensor& t = i % 2 == 0 ? c.weight : c.bias;
    const std::string name = c.name + (i % 2 == 0 ? ".weight" : ".bias");
    if (entries[i].name != name) reject(path, "tensor " + entries[i].name + " found where " + name + " expected");
    if (entries[i].shape != t.shape())
      reject(path, "tensor " + name + " has shape " + to_string(entries[i].shape) + ", model expects " +
                       to_string(t.shape()));
    expected += 3 * t.size() * 4;
  }
  if (bytes.size() - pos != expected)
    reject(path, "payload holds " + std::to_string(bytes.size() - pos) + " bytes, header describes " +
                     std::to_string(expected));

  const char* src = bytes.data() + pos;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& c = convs[i / 2];
    Tensor& t = i % 2 == 0 ? c.weight : c.bias;
    AdamState<float>& s = i % 2 == 0 ? c.weight_state : c.bias_state;
    s.hyper = hyper;
    s.step = entries[i].adam_step;
    s.first_moment.assign(t.size(), 0.0f);
    s.second_moment.assign(t.size(), 0.0f);
    get_floats(src, t.values());
    src += 4 * t.size();
    get_floats(src, s.first_moment);
    src += 4 * t.size();
    get_floats(src, s.second_moment);
    src += 4 * t.size();
  }

  if (step || rng_state) {
    if (!step || !rng_state) reject(path, "incomplete trainer state");
    TrainState st{*step, Rng(0)};
    try {
      st.rng.set_state(*rng_state);
    } catch (const Error&) {
      reject(path, "malformed generator state");
    }
    ck.state = std::move(st);
  }
  return ck;
}

}  // namespace mito
