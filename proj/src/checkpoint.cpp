#include "chcf/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "chcf/error.hpp"

namespace chcf {
namespace {

constexpr const char* kMagic = "chcf-checkpoint";
constexpr int kVersion = 1;

void write_matrix(std::ostream& out, const char* name, const Matrix& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, m(r, c), std::chars_format::general, 17);
      if (c) out << ' ';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) fail("unexpected end of file");
    return w;
  }

  void expect(const std::string& keyword) {
    const std::string w = word();
    if (w != keyword) fail("expected '" + keyword + "', found '" + w + "'");
  }

  std::size_t count() {
    const std::string w = word();
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), value);
    if (ec != std::errc() || ptr != w.data() + w.size()) fail("bad count '" + w + "'");
    return value;
  }

  double real() {
    const std::string w = word();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), value);
    if (ec != std::errc() || ptr != w.data() + w.size()) fail("bad number '" + w + "'");
    return value;
  }

  Matrix matrix(const std::string& name, std::size_t rows, std::size_t cols) {
    expect("matrix");
    expect(name);
    const std::size_t r = count();
    const std::size_t c = count();
    if (r != rows || c != cols) {
      fail("matrix " + name + " is " + std::to_string(r) + "x" + std::to_string(c) + ", expected " +
           std::to_string(rows) + "x" + std::to_string(cols));
    }
    Matrix m(r, c);
    for (double& x : m.flat()) x = real();
    return m;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(source_ + ": checkpoint: " + msg);
  }

 private:
  std::istream& in_;
  std::string source_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const CfParams& p = ckpt.params;
  const CriterionParams& cp = ckpt.criterion;
  char alpha[32];
  const auto res = std::to_chars(alpha, alpha + sizeof alpha, cp.alpha, std::chars_format::general, 17);
  out << kMagic << ' ' << kVersion << '\n';
  out << "model " << to_string(p.model) << '\n';
  out << "dim " << p.dim() << '\n';
  out << "layers " << p.layers << '\n';
  out << "users " << p.num_users() << '\n';
  out << "items " << p.num_items() << '\n';
  out << "behaviors " << cp.num_behaviors() << '\n';
  out << "heads " << p.heads.rows() << '\n';
  out << "alpha ";
  out.write(alpha, res.ptr - alpha);
  out << '\n';
  write_matrix(out, "P", p.users);
  write_matrix(out, "Q", p.items);
  write_matrix(out, "h", p.heads);
  write_matrix(out, "H", cp.user_bounds);
  write_matrix(out, "G", cp.item_bounds);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
  Reader r(in, source);
  r.expect(kMagic);
  if (r.count() != kVersion) r.fail("unsupported version");
  Checkpoint ckpt;
  CfParams& p = ckpt.params;
  r.expect("model");
  try {
    p.model = parse_model(r.word());
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  r.expect("dim");
  const std::size_t dim = r.count();
  r.expect("layers");
  p.layers = r.count();
  r.expect("users");
  const std::size_t users = r.count();
  r.expect("items");
  const std::size_t items = r.count();
  r.expect("behaviors");
  const std::size_t behaviors = r.count();
  r.expect("heads");
  const std::size_t heads = r.count();
  r.expect("alpha");
  ckpt.criterion.alpha = r.real();
  p.users = r.matrix("P", users, dim);
  p.items = r.matrix("Q", items, dim);
  p.heads = r.matrix("h", heads, heads ? dim : 0);
  ckpt.criterion.user_bounds = r.matrix("H", users, behaviors);
  ckpt.criterion.item_bounds = r.matrix("G", items, behaviors);
  return ckpt;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace chcf
