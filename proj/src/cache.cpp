#include "kpg/cache.hpp"

#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "kpg/errors.hpp"
#include "kpg/hash.hpp"

namespace kpg {

namespace {

constexpr char kMagic[4] = {'K', 'P', 'G', 'C'};

// Serialization accumulates into a byte buffer so the checksum can cover
// the whole payload before anything touches the disk.
struct Writer {
  std::vector<char> bytes;

  void raw(const void* p, size_t n) {
    const char* c = static_cast<const char*>(p);
    bytes.insert(bytes.end(), c, c + n);
  }
  void u32(uint32_t v) { raw(&v, sizeof v); }
  void u64(uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void vec(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
  }
  void evec(const Eigen::VectorXd& v) {
    u64(static_cast<uint64_t>(v.size()));
    raw(v.data(), static_cast<size_t>(v.size()) * sizeof(double));
  }
  void cmat(const Eigen::MatrixXcd& m) {
    u64(static_cast<uint64_t>(m.rows()));
    u64(static_cast<uint64_t>(m.cols()));
    raw(m.data(), static_cast<size_t>(m.size()) * sizeof(std::complex<double>));
  }
};

struct Reader {
  const std::vector<char>& bytes;
  size_t pos = 0;
  std::string origin;

  [[noreturn]] void corrupt(const std::string& what) const {
    fail(ErrorCode::CacheCorrupt, origin + ": " + what);
  }
  void raw(void* p, size_t n) {
    if (pos + n > bytes.size()) corrupt("truncated entry");
    std::memcpy(p, bytes.data() + pos, n);
    pos += n;
  }
  uint32_t u32() {
    uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  uint64_t u64() {
    uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  uint64_t count(uint64_t element_size) {
    uint64_t n = u64();
    if (element_size > 0 && n > (bytes.size() - pos) / element_size)
      corrupt("length field exceeds entry size");
    return n;
  }
  std::string str() {
    uint64_t n = count(1);
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  std::vector<double> vec() {
    uint64_t n = count(sizeof(double));
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
  Eigen::VectorXd evec() {
    uint64_t n = count(sizeof(double));
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    raw(v.data(), n * sizeof(double));
    return v;
  }
  Eigen::MatrixXcd cmat() {
    uint64_t r = count(0), c = count(0);
    if (c != 0 && r > (bytes.size() - pos) / sizeof(std::complex<double>) / c)
      corrupt("matrix dimensions exceed entry size");
    Eigen::MatrixXcd m(static_cast<Eigen::Index>(r),
                       static_cast<Eigen::Index>(c));
    raw(m.data(), r * c * sizeof(std::complex<double>));
    return m;
  }
};

uint64_t payload_checksum(const std::vector<char>& payload) {
  Hasher h;
  h.bytes(payload.data(), payload.size());
  return h.value();
}

}  // namespace

SolveCache::SolveCache(std::string directory) : dir_(std::move(directory)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::string SolveCache::entry_path(uint64_t key) const {
  char name[32];
  std::snprintf(name, sizeof name, "%016llx.kpgc",
                static_cast<unsigned long long>(key));
  return (std::filesystem::path(dir_) / name).string();
}

std::optional<CachedSolve> SolveCache::load(uint64_t key) {
  if (!enabled()) return std::nullopt;
  const std::string path = entry_path(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ++misses_;
    return std::nullopt;
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  Reader r{bytes, 0, path};

  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) r.corrupt("bad magic");
  if (r.u32() != kCacheFormatVersion) r.corrupt("format version mismatch");
  if (r.u64() != key) r.corrupt("key does not match file name");
  if (r.str() != kCodeVersion) r.corrupt("code version mismatch");

  const uint64_t payload_size = r.count(1);
  const size_t payload_start = r.pos;
  if (payload_start + payload_size + sizeof(uint64_t) != bytes.size())
    r.corrupt("payload size disagrees with file size");
  {
    Hasher h;
    h.bytes(bytes.data() + payload_start, payload_size);
    uint64_t stored;
    std::memcpy(&stored, bytes.data() + payload_start + payload_size,
                sizeof stored);
    if (h.value() != stored) r.corrupt("checksum mismatch");
  }

  CachedSolve out;
  const uint64_t n_gates = r.count(1);
  for (uint64_t g = 0; g < n_gates; ++g) {
    std::string name = r.str();
    out.gate_voltages[name] = r.f64();
  }
  out.potential = r.vec();
  out.energies = r.evec();
  out.splittings = r.evec();
  out.down = r.cmat();
  out.up = r.cmat();
  if (r.pos != payload_start + payload_size) r.corrupt("trailing bytes");
  ++hits_;
  return out;
}

void SolveCache::store(uint64_t key, const CachedSolve& entry) {
  if (!enabled()) return;

  Writer payload;
  payload.u64(entry.gate_voltages.size());
  for (const auto& [name, v] : entry.gate_voltages) {
    payload.str(name);
    payload.f64(v);
  }
  payload.vec(entry.potential);
  payload.evec(entry.energies);
  payload.evec(entry.splittings);
  payload.cmat(entry.down);
  payload.cmat(entry.up);

  Writer file;
  file.raw(kMagic, 4);
  file.u32(kCacheFormatVersion);
  file.u64(key);
  file.str(kCodeVersion);
  file.u64(payload.bytes.size());
  file.raw(payload.bytes.data(), payload.bytes.size());
  file.u64(payload_checksum(payload.bytes));

  const std::string path = entry_path(key);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      fail(ErrorCode::CacheCorrupt, "cannot open cache file for write: " + tmp);
    out.write(file.bytes.data(),
              static_cast<std::streamsize>(file.bytes.size()));
    if (!out)
      fail(ErrorCode::CacheCorrupt, "short write to cache file: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

uint64_t solve_cache_key(const DeviceModel& device, const Mesh& mesh,
                         const std::map<std::string, double>& bias,
                         const CouplingFlags& flags,
                         const SolverConfig& solver) {
  Hasher h;
  h.add(static_cast<uint64_t>(kCacheFormatVersion));
  h.add(std::string(kCodeVersion));
  h.add(device.content_hash());
  h.add(mesh.content_hash());
  h.add(static_cast<int64_t>(bias.size()));
  for (const auto& [name, v] : bias) {
    h.add(name);
    h.add(v);
  }
  h.add(flags.peierls_on);
  h.add(flags.bloch_zeeman_on);
  h.add(flags.strain_on);
  h.add(flags.gamma3_override.has_value());
  if (flags.gamma3_override) h.add(*flags.gamma3_override);
  h.add(solver.pairs);
  h.add(solver.pairing_tol);
  h.add(solver.tol);
  h.add(solver.seed);
  h.add(solver.max_iterations);
  return h.value();
}

}  // namespace kpg
