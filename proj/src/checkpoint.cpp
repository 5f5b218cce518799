#include "stgan/checkpoint.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace stgan::ckpt {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kMagic = "stgan-checkpoint";

std::string join_shape(const nd::Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) out += (i ? "x" : "") + std::to_string(shape[i]);
  return out.empty() ? "scalar" : out;
}

std::uint64_t parse_u64(std::string_view s, const std::string& what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::runtime_error("checkpoint: bad " + what + " '" + std::string(s) + "'");
  return v;
}

nd::Shape parse_shape(std::string_view s) {
  nd::Shape shape;
  if (s == "scalar") return shape;
  std::size_t start = 0;
  while (true) {
    const auto x = s.find('x', start);
    shape.push_back(parse_u64(s.substr(start, x == std::string_view::npos ? s.npos : x - start), "shape"));
    if (x == std::string_view::npos) break;
    start = x + 1;
  }
  return shape;
}

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), 8);
}

std::uint64_t get_u64(const std::array<unsigned char, 8>& b) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

double parse_double(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("checkpoint config lacks '" + key + "'");
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::logic_error&) {
    throw std::runtime_error("checkpoint config '" + key + "' is not a number: " + it->second);
  }
}

std::size_t parse_size(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("checkpoint config lacks '" + key + "'");
  return parse_u64(it->second, key);
}

std::string sizes_str(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::size_t> parse_sizes(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("checkpoint config lacks '" + key + "'");
  std::vector<std::size_t> out;
  std::string_view s = it->second;
  while (!s.empty()) {
    const auto c = s.find(',');
    out.push_back(parse_u64(s.substr(0, c), key));
    if (c == std::string_view::npos) break;
    s.remove_prefix(c + 1);
  }
  return out;
}

std::string mode_name(st::CombineMode m) {
  switch (m) {
    case st::CombineMode::Uni: return "uni";
    case st::CombineMode::Bi: return "bi";
    case st::CombineMode::CombineSkip: return "combine-skip";
  }
  return "?";
}

st::CombineMode parse_mode(const std::string& s) {
  for (auto m : {st::CombineMode::Uni, st::CombineMode::Bi, st::CombineMode::CombineSkip})
    if (mode_name(m) == s) return m;
  throw std::runtime_error("checkpoint: unknown combine mode '" + s + "'");
}

}  // namespace

const Tensor& Checkpoint::at(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw std::runtime_error("checkpoint has no tensor '" + name + "'");
}

void save(const fs::path& path, const std::string& kind, const KeyValues& config, const NamedTensors& tensors) {
  std::ostringstream manifest;
  manifest << "format=" << kMagic << "\nversion=" << kFormatVersion << "\nkind=" << kind << '\n';
  for (const auto& [k, v] : config) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw std::invalid_argument("checkpoint config entry '" + k + "' has a reserved character");
    manifest << "config." << k << '=' << v << '\n';
  }
  manifest << "tensors=" << tensors.size() << '\n';
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& [name, t] = tensors[i];
    if (name.find_first_of(" \n") != std::string::npos) throw std::invalid_argument("tensor name '" + name + "' has whitespace");
    manifest << "tensor." << i << '=' << name << ' ' << join_shape(t.shape()) << ' ' << offset << " f32le\n";
    offset += 4 * t.numel();
  }
  manifest << "payload_bytes=" << offset << '\n';

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    const std::string m = manifest.str();
    put_u64(os, m.size());
    os.write(m.data(), static_cast<std::streamsize>(m.size()));
    for (const auto& [name, t] : tensors) {
      for (double v : t.data()) {
        const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        const char b[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                           static_cast<char>((bits >> 16) & 0xFF), static_cast<char>((bits >> 24) & 0xFF)};
        os.write(b, 4);
      }
    }
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load(const fs::path& path, const std::string& expected_kind) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::array<unsigned char, 8> len_bytes{};
  is.read(reinterpret_cast<char*>(len_bytes.data()), 8);
  if (!is) throw std::runtime_error(path.string() + ": truncated header");
  const std::uint64_t len = get_u64(len_bytes);
  if (len > (1u << 24)) throw std::runtime_error(path.string() + ": implausible manifest length");
  std::string manifest(len, '\0');
  is.read(manifest.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error(path.string() + ": truncated manifest");

  KeyValues kv;
  std::istringstream ms(manifest);
  std::string line;
  while (std::getline(ms, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error(path.string() + ": bad manifest line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (kv["format"] != kMagic) throw std::runtime_error(path.string() + ": not a checkpoint");
  Checkpoint ck;
  ck.version = static_cast<int>(parse_u64(kv["version"], "version"));
  if (ck.version != kFormatVersion)
    throw std::runtime_error(fmt::format("{}: format version {} (expected {})", path.string(), ck.version, kFormatVersion));
  ck.kind = kv["kind"];
  if (!expected_kind.empty() && ck.kind != expected_kind)
    throw std::runtime_error(path.string() + ": holds a '" + ck.kind + "', expected '" + expected_kind + "'");
  for (const auto& [k, v] : kv)
    if (k.starts_with("config.")) ck.config[k.substr(7)] = v;

  const std::size_t count = parse_u64(kv["tensors"], "tensor count");
  std::uint64_t expected_offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream es(kv["tensor." + std::to_string(i)]);
    TensorInfo info;
    std::string shape, offset;
    if (!(es >> info.name >> shape >> offset >> info.dtype)) throw std::runtime_error(path.string() + ": bad tensor entry " + std::to_string(i));
    info.shape = parse_shape(shape);
    info.offset = parse_u64(offset, "offset");
    if (info.dtype != "f32le") throw std::runtime_error(path.string() + ": unsupported dtype " + info.dtype);
    if (info.offset != expected_offset) throw std::runtime_error(path.string() + ": tensor offsets are not contiguous");
    expected_offset += 4 * nd::numel(info.shape);
    ck.index.push_back(info);
  }
  if (parse_u64(kv["payload_bytes"], "payload length") != expected_offset)
    throw std::runtime_error(path.string() + ": payload length disagrees with the tensor index");

  std::vector<char> payload(expected_offset);
  is.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::uint64_t>(is.gcount()) != expected_offset) throw std::runtime_error(path.string() + ": truncated payload");
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error(path.string() + ": trailing bytes after payload");

  for (const auto& info : ck.index) {
    std::vector<double> values(nd::numel(info.shape));
    const auto* p = reinterpret_cast<const unsigned char*>(payload.data() + info.offset);
    for (std::size_t k = 0; k < values.size(); ++k, p += 4) {
      const std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
                                 (std::uint32_t{p[3]} << 24);
      values[k] = std::bit_cast<float>(bits);
    }
    ck.tensors.emplace_back(info.name, Tensor(info.shape, std::move(values)));
  }
  return ck;
}

void assign(const Checkpoint& ckpt, const NamedTensors& params) {
  if (ckpt.tensors.size() != params.size())
    throw std::runtime_error(fmt::format("checkpoint holds {} tensors, model has {}", ckpt.tensors.size(), params.size()));
  for (const auto& [name, p] : params) {
    const Tensor& src = ckpt.at(name);
    if (src.shape() != p.shape())
      throw std::runtime_error("checkpoint tensor '" + name + "' has shape " + nd::shape_str(src.shape()) +
                               ", model expects " + nd::shape_str(p.shape()));
    auto dst = Tensor(p).mutable_data();
    std::copy(src.data().begin(), src.data().end(), dst.begin());
  }
}

KeyValues to_kv(const st::SkipThoughtConfig& c) {
  return {{"d_w", std::to_string(c.d_w)},
          {"h_enc", std::to_string(c.h_enc)},
          {"h_dec", std::to_string(c.h_dec)},
          {"mode", mode_name(c.mode)},
          {"max_decode_len", std::to_string(c.max_decode_len)},
          {"beam_width", std::to_string(c.beam_width)},
          {"epochs", std::to_string(c.epochs)},
          {"batch_size", std::to_string(c.batch_size)},
          {"lr", fmt_double(c.lr)},
          {"clip_norm", fmt_double(c.clip_norm)},
          {"seed", std::to_string(c.seed)}};
}

st::SkipThoughtConfig st_config_from(const KeyValues& kv) {
  st::SkipThoughtConfig c;
  c.d_w = parse_size(kv, "d_w");
  c.h_enc = parse_size(kv, "h_enc");
  c.h_dec = parse_size(kv, "h_dec");
  c.mode = parse_mode(kv.at("mode"));
  c.max_decode_len = parse_size(kv, "max_decode_len");
  c.beam_width = parse_size(kv, "beam_width");
  c.epochs = parse_size(kv, "epochs");
  c.batch_size = parse_size(kv, "batch_size");
  c.lr = parse_double(kv, "lr");
  c.clip_norm = parse_double(kv, "clip_norm");
  c.seed = parse_size(kv, "seed");
  return c;
}

KeyValues to_kv(const gan::GanConfig& c) {
  return {{"noise_dim", std::to_string(c.noise_dim)},
          {"data_dim", std::to_string(c.data_dim)},
          {"cond_dim", std::to_string(c.cond_dim)},
          {"g_hidden", sizes_str(c.g_hidden)},
          {"g_output", std::string(gan::output_name(c.g_output))},
          {"d_hidden", sizes_str(c.d_hidden)},
          {"d_conv_channels", sizes_str(c.d_conv_channels)},
          {"d_conv_kernel", std::to_string(c.d_conv_kernel)},
          {"fmeasure", std::string(gan::fmeasure_name(c.fmeasure))},
          {"minibatch", c.minibatch.enabled ? "1" : "0"},
          {"minibatch_a", std::to_string(c.minibatch.a_in)},
          {"minibatch_b", std::to_string(c.minibatch.b)},
          {"minibatch_c", std::to_string(c.minibatch.c)},
          {"gp_lambda", fmt_double(c.gp_lambda)},
          {"clip_value", fmt_double(c.clip_value)},
          {"leaky_slope", fmt_double(c.leaky_slope)},
          {"g_updates", std::to_string(c.g_updates)},
          {"d_updates", std::to_string(c.d_updates)},
          {"batch_size", std::to_string(c.batch_size)},
          {"lr", fmt_double(c.lr)},
          {"beta1", fmt_double(c.beta1)},
          {"beta2", fmt_double(c.beta2)},
          {"clip_norm", fmt_double(c.clip_norm)},
          {"rounds", std::to_string(c.rounds)},
          {"snapshot_every", std::to_string(c.snapshot_every)},
          {"snapshot_size", std::to_string(c.snapshot_size)},
          {"seed", std::to_string(c.seed)}};
}

gan::GanConfig gan_config_from(const KeyValues& kv) {
  gan::GanConfig c;
  c.noise_dim = parse_size(kv, "noise_dim");
  c.data_dim = parse_size(kv, "data_dim");
  c.cond_dim = parse_size(kv, "cond_dim");
  c.g_hidden = parse_sizes(kv, "g_hidden");
  c.d_hidden = parse_sizes(kv, "d_hidden");
  c.d_conv_channels = parse_sizes(kv, "d_conv_channels");
  c.d_conv_kernel = parse_size(kv, "d_conv_kernel");
  try {
    c.fmeasure = gan::parse_fmeasure(kv.at("fmeasure"));
    c.g_output = gan::parse_output(kv.at("g_output"));
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("checkpoint config: ") + e.what());
  }
  c.minibatch.enabled = parse_size(kv, "minibatch") != 0;
  c.minibatch.a_in = parse_size(kv, "minibatch_a");
  c.minibatch.b = parse_size(kv, "minibatch_b");
  c.minibatch.c = parse_size(kv, "minibatch_c");
  c.gp_lambda = parse_double(kv, "gp_lambda");
  c.clip_value = parse_double(kv, "clip_value");
  c.leaky_slope = parse_double(kv, "leaky_slope");
  c.g_updates = parse_size(kv, "g_updates");
  c.d_updates = parse_size(kv, "d_updates");
  c.batch_size = parse_size(kv, "batch_size");
  c.lr = parse_double(kv, "lr");
  c.beta1 = parse_double(kv, "beta1");
  c.beta2 = parse_double(kv, "beta2");
  c.clip_norm = parse_double(kv, "clip_norm");
  c.rounds = parse_size(kv, "rounds");
  c.snapshot_every = parse_size(kv, "snapshot_every");
  c.snapshot_size = parse_size(kv, "snapshot_size");
  c.seed = parse_size(kv, "seed");
  return c;
}

void save_model(const fs::path& path, const st::SkipThoughtModel& model) {
  auto kv = to_kv(model.config);
  kv["vocab_size"] = std::to_string(model.vocab_size());
  save(path, "skipthought", kv, model.named_params());
}

st::SkipThoughtModel load_model(const fs::path& path) {
  const auto ck = load(path, "skipthought");
  auto model = st::make_model(st_config_from(ck.config), parse_size(ck.config, "vocab_size"));
  assign(ck, model.named_params());
  return model;
}

void save_decoder(const fs::path& path, const st::Decoder& decoder) {
  const KeyValues kv{{"vocab_size", std::to_string(decoder.vocab_size())},
                     {"d_w", std::to_string(decoder.embedding.size(1))},
                     {"hidden", std::to_string(decoder.gru.hidden())},
                     {"cond_dim", std::to_string(decoder.gru.cond_reset.size(1))}};
  save(path, "decoder", kv, st::named_params(decoder));
}

st::Decoder load_decoder(const fs::path& path) {
  const auto ck = load(path, "decoder");
  std::mt19937_64 rng(0);
  auto d = st::make_decoder(
      st::word_embedding_param(parse_size(ck.config, "vocab_size"), parse_size(ck.config, "d_w"), rng),
      parse_size(ck.config, "hidden"), parse_size(ck.config, "cond_dim"), rng);
  assign(ck, st::named_params(d));
  return d;
}

void save_gan(const fs::path& path, const gan::GanModel& model) {
  auto kv = to_kv(model.config);
  kv["d_steps"] = std::to_string(model.d_steps);
  kv["g_steps"] = std::to_string(model.g_steps);
  NamedTensors named;
  for (auto& [n, t] : model.g.named_params()) named.emplace_back("g." + n, t);
  for (auto& [n, t] : model.d.named_params()) named.emplace_back("d." + n, t);
  save(path, "gan", kv, named);
}

gan::GanModel load_gan(const fs::path& path) {
  const auto ck = load(path, "gan");
  auto model = gan::make_gan(gan_config_from(ck.config));
  model.d_steps = parse_size(ck.config, "d_steps");
  model.g_steps = parse_size(ck.config, "g_steps");
  NamedTensors named;
  for (auto& [n, t] : model.g.named_params()) named.emplace_back("g." + n, t);
  for (auto& [n, t] : model.d.named_params()) named.emplace_back("d." + n, t);
  assign(ck, named);
  return model;
}

void save_rows(const fs::path& path, const std::string& kind, const gan::Rows& rows, const KeyValues& config) {
  const std::size_t width = rows.empty() ? 0 : rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * width);
  for (const auto& r : rows) {
    if (r.size() != width) throw std::invalid_argument("save_rows: ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  save(path, kind, config, {{"rows", Tensor({rows.size(), width}, std::move(flat))}});
}

gan::Rows load_rows(const fs::path& path, const std::string& kind, KeyValues* config) {
  const auto ck = load(path, kind);
  const Tensor& t = ck.at("rows");
  if (t.dim() != 2) throw std::runtime_error(path.string() + ": rows tensor is not a matrix");
  gan::Rows out(t.size(0));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].assign(t.data().begin() + i * t.size(1), t.data().begin() + (i + 1) * t.size(1));
  if (config) *config = ck.config;
  return out;
}

}  // namespace stgan::ckpt
