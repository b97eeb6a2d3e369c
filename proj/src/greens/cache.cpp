#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "edgeflow/greens.hpp"

namespace edgeflow {

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, data.data(), data.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

namespace {

template <class T>
void put(std::string& s, const T& v) {
  s.append(reinterpret_cast<const char*>(&v), sizeof(T));
}
void put_mat(std::string& s, const Mat& M) {
  s.append(reinterpret_cast<const char*>(M.data()), sizeof(cplx) * M.size());
}

constexpr char kMagic[8] = {'E', 'F', 'S', 'P', 'E', 'C', '1', '\n'};

}  // namespace

std::string spectrum_hash(const HoppingModel& m, const QuasiPeriodicPotential& pot) {
  std::string s;
  put(s, m.lattice.L1);
  put(s, m.lattice.L2);
  put(s, m.lattice.S);
  put(s, m.mu);
  put_mat(s, m.T0);
  put_mat(s, m.Tp);
  put_mat(s, m.Tm);
  put(s, pot.lambda);
  if (pot.lambda != 0.0) {
    RVec phi = build_potential(pot, m.lattice);
    s.append(reinterpret_cast<const char*>(phi.data()), sizeof(double) * phi.size());
  }
  return sha256_hex(s);
}

std::shared_ptr<const Spectrum> cached_spectrum(const HoppingModel& m,
                                                const QuasiPeriodicPotential& pot,
                                                const std::filesystem::path& cache_dir, bool* hit) {
  namespace fs = std::filesystem;
  fs::path dir = cache_dir;
  if (dir.empty())
    if (const char* env = std::getenv("EDGEFLOW_CACHE_DIR")) dir = env;
  if (hit) *hit = false;
  if (dir.empty()) return std::make_shared<const Spectrum>(diagonalize(m, pot));

  const std::string key = spectrum_hash(m, pot);
  const fs::path file = dir / ("spectrum-" + key + ".bin");
  const long long N = m.lattice.dim();
  if (fs::exists(file)) {
    std::ifstream in(file, std::ios::binary);
    char magic[8];
    long long n = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (in && std::equal(magic, magic + 8, kMagic) && n == N) {
      auto sp = std::make_shared<Spectrum>();
      sp->lattice = m.lattice;
      sp->mu = m.mu;
      sp->energy.resize(N);
      sp->U.resize(N, N);
      in.read(reinterpret_cast<char*>(sp->energy.data()), sizeof(double) * N);
      in.read(reinterpret_cast<char*>(sp->U.data()), sizeof(cplx) * N * N);
      if (in) {
        if (hit) *hit = true;
        return sp;
      }
    }
  }
  auto sp = std::make_shared<const Spectrum>(diagonalize(m, pot));
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&N), sizeof N);
    out.write(reinterpret_cast<const char*>(sp->energy.data()), sizeof(double) * N);
    out.write(reinterpret_cast<const char*>(sp->U.data()), sizeof(cplx) * N * N);
    if (!out) return sp;  // cache is best effort
  }
  fs::rename(tmp, file, ec);
  return sp;
}

}  // namespace edgeflow
