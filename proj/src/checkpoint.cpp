#include "csp/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace csp {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'P', 'C'};

struct Writer {
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back((v >> (8 * i)) & 0xff);
  }
  void f64(double v) {
    const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back((u >> (8 * i)) & 0xff);
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
};

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > bytes.size())
      throw ParseError(std::string("truncated checkpoint while reading ") + what,
                       pos);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes[pos++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[pos + i]) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(v);
  }
};

}  // namespace

Checkpoint checkpoint_from(const Subspace& subspace,
                           const PolicyRegistry& registry) {
  Checkpoint c;
  c.signature = subspace.signature;
  for (const ParamVector& a : subspace.anchors) c.anchors.push_back(a.values);
  c.tasks = registry.entries;
  return c;
}

void apply_checkpoint(const Checkpoint& c, Subspace& subspace,
                      PolicyRegistry& registry) {
  subspace.signature = c.signature;
  subspace.anchors.clear();
  for (const std::vector<double>& values : c.anchors) {
    ParamVector p(c.signature);
    p.values = values;
    p.check();
    subspace.anchors.push_back(std::move(p));
  }
  registry.entries = c.tasks;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  c.signature.validate();
  const long P = c.signature.param_count();
  const std::size_t m = c.anchors.size();
  if (m == 0) throw InputError("checkpoint needs at least one anchor");
  for (const auto& a : c.anchors)
    if (static_cast<long>(a.size()) != P)
      throw InputError("checkpoint anchor length does not match signature");
  for (const PolicyEntry& t : c.tasks) {
    if (t.alpha.size() != m)
      throw InputError("checkpoint alpha row length does not match anchors");
    if (!is_simplex(t.alpha))
      throw InputError("checkpoint alpha row violates simplex constraints");
  }

  Writer w;
  w.raw(kMagic, 4);
  w.u32(Checkpoint::kVersion);
  w.u32(static_cast<std::uint32_t>(c.signature.widths.size()));
  for (int width : c.signature.widths) w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(c.signature.activations.size()));
  for (Act a : c.signature.activations) w.u8(static_cast<std::uint8_t>(a));
  w.u32(static_cast<std::uint32_t>(m));
  for (const auto& anchor : c.anchors)
    for (double v : anchor) w.f64(v);
  w.u32(static_cast<std::uint32_t>(c.tasks.size()));
  for (const PolicyEntry& t : c.tasks)
    for (double v : t.alpha) w.f64(v);
  for (const PolicyEntry& t : c.tasks) {
    w.u32(static_cast<std::uint32_t>(t.task_name.size()));
    w.raw(t.task_name.data(), t.task_name.size());
    w.f64(t.reference);
  }
  return std::move(w.bytes);
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw ParseError("bad checkpoint magic", 0);
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != Checkpoint::kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version),
                     4);

  Checkpoint c;
  const std::uint32_t n_widths = r.u32("width count");
  if (n_widths < 2 || n_widths > 64)
    throw ParseError("implausible width count", r.pos - 4);
  c.signature.widths.resize(n_widths);
  for (auto& width : c.signature.widths) {
    const std::uint32_t v = r.u32("width");
    if (v == 0 || v > 1u << 20) throw ParseError("bad layer width", r.pos - 4);
    width = static_cast<int>(v);
  }
  const std::uint32_t n_acts = r.u32("activation count");
  if (n_acts != n_widths - 1)
    throw ParseError("activation count does not match widths", r.pos - 4);
  c.signature.activations.resize(n_acts);
  for (auto& a : c.signature.activations) {
    const std::uint8_t v = r.u8("activation id");
    if (v > 2) throw ParseError("unknown activation id", r.pos - 1);
    a = static_cast<Act>(v);
  }
  c.signature.validate();

  const std::uint32_t m = r.u32("anchor count");
  if (m == 0) throw ParseError("checkpoint has zero anchors", r.pos - 4);
  const long P = c.signature.param_count();
  c.anchors.assign(m, std::vector<double>(P));
  for (auto& anchor : c.anchors)
    for (double& v : anchor) {
      v = r.f64("anchor value");
      if (!std::isfinite(v))
        throw ParseError("non-finite anchor value", r.pos - 8);
    }

  const std::uint32_t n_tasks = r.u32("task count");
  if (n_tasks > 1u << 20) throw ParseError("implausible task count", r.pos - 4);
  c.tasks.assign(n_tasks, PolicyEntry{});
  for (auto& t : c.tasks) {
    t.alpha.resize(m);
    const std::size_t row_at = r.pos;
    for (double& v : t.alpha) v = r.f64("alpha value");
    if (!is_simplex(t.alpha))
      throw ParseError("alpha row violates simplex constraints", row_at);
  }
  for (auto& t : c.tasks) {
    const std::uint32_t len = r.u32("task name length");
    r.need(len, "task name");
    t.task_name.assign(reinterpret_cast<const char*>(bytes.data() + r.pos), len);
    r.pos += len;
    t.reference = r.f64("task reference");
  }
  if (r.pos != bytes.size())
    throw ParseError("trailing bytes after checkpoint payload", r.pos);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

void save_params(const std::filesystem::path& path, const ParamVector& params) {
  Checkpoint c;
  c.signature = params.signature;
  c.anchors.push_back(params.values);
  save_checkpoint(path, c);
}

ParamVector load_params(const std::filesystem::path& path) {
  const Checkpoint c = load_checkpoint(path);
  if (c.anchors.size() != 1)
    throw ConfigError("expected a single-network file: " + path.string());
  ParamVector p(c.signature);
  p.values = c.anchors.front();
  return p;
}

}  // namespace csp
