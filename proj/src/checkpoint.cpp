#include "citrus/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "citrus/errors.hpp"

namespace citrus {

namespace {

constexpr const char* kMagic = "citrus-checkpoint";
constexpr int kVersion = 1;

std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

void write_values(std::ostream& os, std::span<const double> values) {
  for (double v : values) os << ' ' << hex(v);
  os << '\n';
}

void write_matrix(std::ostream& os, const char* tag, const Matrix& m) {
  os << tag << ' ' << m.rows() << ' ' << m.cols();
  write_values(os, m.data());
}

class Reader {
 public:
  explicit Reader(const std::string& text) : in_(text) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw ParseError("checkpoint: unexpected end of input");
    return w;
  }

  void expect(const std::string& tag) {
    const std::string w = word();
    if (w != tag) throw ParseError("checkpoint: expected '" + tag + "', found '" + w + "'");
  }

  std::size_t count() {
    const std::string w = word();
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(w.c_str(), &end, 10);
    if (errno != 0 || end == w.c_str() || *end != '\0')
      throw ParseError("checkpoint: expected an integer, found '" + w + "'");
    return static_cast<std::size_t>(v);
  }

  double number() {
    const std::string w = word();
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end == w.c_str() || *end != '\0')
      throw ParseError("checkpoint: expected a number, found '" + w + "'");
    return v;
  }

  std::vector<double> numbers(std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = number();
    return v;
  }

  Matrix matrix(const std::string& tag) {
    expect(tag);
    const std::size_t r = count();
    const std::size_t c = count();
    return Matrix(r, c, numbers(r * c));
  }

 private:
  std::istringstream in_;
};

}  // namespace

std::string serialize_model(const CitrusModel& model) {
  std::ostringstream os;
  os << kMagic << ' ' << kVersion << '\n';
  os << "seed " << model.seed << '\n';
  os << "policy " << to_string(model.policy) << '\n';
  os << "concat_encoded " << (model.concat_encoded ? 1 : 0) << '\n';
  os << "readout_modes " << model.readout_modes << '\n';
  os << "factors " << model.bases.size() << '\n';
  for (const auto& b : model.bases) {
    os << "basis " << b.source_n << ' ' << b.k << '\n';
    os << "eigenvalues";
    write_values(os, b.eigenvalues);
    write_matrix(os, "eigenvectors", b.eigenvectors);
  }
  write_matrix(os, "encoder", model.encoder);
  os << "blocks " << model.blocks.size() << '\n';
  for (const auto& blk : model.blocks) {
    os << "block residual " << (blk.residual ? 1 : 0) << " activation " << to_string(blk.activation)
       << " field " << to_string(blk.receptive.mode) << ' ' << blk.receptive.factors << ' '
       << blk.receptive.channels << '\n';
    os << "raw " << blk.receptive.raw.size();
    write_values(os, blk.receptive.raw);
    write_matrix(os, "mix", blk.mix);
    os << "mlp " << blk.mlp.size() << '\n';
    for (const auto& m : blk.mlp) write_matrix(os, "layer", m);
  }
  write_matrix(os, "decoder", model.decoder);
  os << "bias " << model.decoder_bias.size();
  write_values(os, model.decoder_bias);
  os << "end\n";
  return os.str();
}

CitrusModel deserialize_model(const std::string& text) {
  Reader in(text);
  in.expect(kMagic);
  if (in.count() != static_cast<std::size_t>(kVersion))
    throw ParseError("checkpoint: unsupported version");
  CitrusModel model;
  in.expect("seed");
  {
    const std::string w = in.word();
    model.seed = std::strtoull(w.c_str(), nullptr, 10);
  }
  in.expect("policy");
  model.policy = truncation_policy_from_string(in.word());
  in.expect("concat_encoded");
  model.concat_encoded = in.count() != 0;
  in.expect("readout_modes");
  model.readout_modes = in.count();
  in.expect("factors");
  const std::size_t factors = in.count();
  for (std::size_t p = 0; p < factors; ++p) {
    SpectralBasis b;
    in.expect("basis");
    b.source_n = in.count();
    b.k = in.count();
    in.expect("eigenvalues");
    b.eigenvalues = in.numbers(b.k);
    b.eigenvectors = in.matrix("eigenvectors");
    if (b.eigenvectors.rows() != b.source_n || b.eigenvectors.cols() != b.k)
      throw ParseError("checkpoint: eigenvector shape does not match basis header");
    model.bases.push_back(std::move(b));
  }
  model.encoder = in.matrix("encoder");
  in.expect("blocks");
  const std::size_t nblocks = in.count();
  for (std::size_t i = 0; i < nblocks; ++i) {
    CitrusBlock blk;
    in.expect("block");
    in.expect("residual");
    blk.residual = in.count() != 0;
    in.expect("activation");
    blk.activation = activation_from_string(in.word());
    in.expect("field");
    blk.receptive.mode = field_mode_from_string(in.word());
    blk.receptive.factors = in.count();
    blk.receptive.channels = in.count();
    in.expect("raw");
    blk.receptive.raw = in.numbers(in.count());
    blk.mix = in.matrix("mix");
    in.expect("mlp");
    const std::size_t layers = in.count();
    for (std::size_t h = 0; h < layers; ++h) blk.mlp.push_back(in.matrix("layer"));
    model.blocks.push_back(std::move(blk));
  }
  model.decoder = in.matrix("decoder");
  in.expect("bias");
  model.decoder_bias = in.numbers(in.count());
  in.expect("end");
  return model;
}

void save_checkpoint(const CitrusModel& model, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    out << serialize_model(model);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot move checkpoint into place at " + path);
}

CitrusModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace citrus
