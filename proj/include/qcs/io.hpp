#pragma once

// On-disk formats. Every binary file is one line of JSON header terminated by
// '\n', followed by a little-endian payload.
//
//   tensor       {"dtype":"f64","shape":[...],"layout":"row-major","kind":"signal"|"image"}
//                + prod(shape) f64
//   measurement  {"M","N","Q","delta","sigma","operator_seed","noise_seed"[,"shape":[H,W,C]]}
//                + M u16 codeword indices
//   schedule     plain JSON {"K","lambdas":[...],"betas":[...],"sigma"}
//   spectral     {"kind":"spectral","G","R","J","H","W","warmup"} + f64 sections
//   dmb          {"kind":"dmb","C","state_dim","G","R","J","H","W","w1","w2","warmup"}
//                + f64 sections
//
// Complex arrays are stored as interleaved (re, im) pairs. Section order is
// listed next to write_spectral_sections / write_dmb_params.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qcs/dmb.hpp"
#include "qcs/error.hpp"
#include "qcs/refine.hpp"
#include "qcs/sensing.hpp"
#include "qcs/spectral.hpp"
#include "qcs/unfold.hpp"

namespace qcs::io {

using Json = nlohmann::json;

namespace detail {

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

class Writer {
 public:
  explicit Writer(const Json& header) { out_ << header.dump() << '\n'; }

  void f64(double v) { raw(to_little_endian(v)); }
  void u16(std::uint16_t v) { raw(to_little_endian(v)); }
  void complex(const Complex& z) {
    f64(z.real());
    f64(z.imag());
  }
  template <typename Range>
  void f64s(const Range& r) {
    for (double v : r) f64(v);
  }
  void complexes(const std::vector<Complex>& r) {
    for (const auto& z : r) complex(z);
  }
  void matrix(const RowMajorMatrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }

  std::string bytes() const { return out_.str(); }

 private:
  template <typename T>
  void raw(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  std::ostringstream out_;
};

class Reader {
 public:
  Reader(std::string bytes, const std::string& what) : bytes_(std::move(bytes)), what_(what) {
    const auto nl = bytes_.find('\n');
    if (nl == std::string::npos) throw InputError(what_ + ": missing header line");
    try {
      header_ = Json::parse(bytes_.substr(0, nl));
    } catch (const Json::exception& e) {
      throw InputError(what_ + ": malformed JSON header: " + e.what());
    }
    if (!header_.is_object()) throw InputError(what_ + ": header is not a JSON object");
    pos_ = nl + 1;
  }

  const Json& header() const { return header_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void expect_payload(std::size_t n) const {
    if (remaining() != n) {
      throw InputError(what_ + ": payload is " + std::to_string(remaining()) + " bytes, expected " +
                       std::to_string(n));
    }
  }

  double f64() { return to_little_endian(raw<double>()); }
  std::uint16_t u16() { return to_little_endian(raw<std::uint16_t>()); }
  Complex complex() {
    const double re = f64();
    return {re, f64()};
  }
  std::vector<double> f64s(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  std::vector<Complex> complexes(std::size_t n) {
    std::vector<Complex> v(n);
    for (auto& z : v) z = complex();
    return v;
  }
  RowMajorMatrix matrix(std::size_t rows, std::size_t cols) {
    RowMajorMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
    return m;
  }

  // Typed header access; missing or mistyped fields are malformed input.
  template <typename T>
  T get(const char* key) const {
    if (!header_.contains(key)) throw InputError(what_ + ": header lacks \"" + key + "\"");
    try {
      return header_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw InputError(what_ + ": header field \"" + key + "\" has the wrong type");
    }
  }

 private:
  template <typename T>
  T raw() {
    if (remaining() < sizeof(T)) throw InputError(what_ + ": truncated payload");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string bytes_;
  std::string what_;
  Json header_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Tensors

struct TensorData {
  std::vector<std::size_t> shape;
  std::string kind = "signal";
  Vector values;

  // [N] -> (1, N, 1); [H, W] -> (H, W, 1); [H, W, C] -> (H, W, C).
  ImageShape image_shape() const {
    if (shape.size() == 1) return ImageShape::flat(shape[0]);
    if (shape.size() == 2) return {shape[0], shape[1], 1};
    return {shape[0], shape[1], shape[2]};
  }
};

inline TensorData make_tensor(Vector values, const ImageShape& shape, bool as_image) {
  TensorData t;
  t.values = std::move(values);
  if (as_image) {
    t.kind = "image";
    t.shape = {shape.height, shape.width, shape.channels};
  } else {
    t.shape = {static_cast<std::size_t>(t.values.size())};
  }
  return t;
}

inline std::string encode_tensor(const TensorData& t) {
  std::size_t count = 1;
  for (auto s : t.shape) count *= s;
  if (count != static_cast<std::size_t>(t.values.size())) {
    throw DimensionError("encode_tensor: shape does not match value count");
  }
  detail::Writer w(Json{{"dtype", "f64"}, {"shape", t.shape}, {"layout", "row-major"}, {"kind", t.kind}});
  w.f64s(t.values);
  return w.bytes();
}

inline TensorData decode_tensor(std::string bytes, const std::string& what = "tensor file") {
  detail::Reader r(std::move(bytes), what);
  if (r.get<std::string>("dtype") != "f64") throw InputError(what + ": dtype must be \"f64\"");
  if (r.get<std::string>("layout") != "row-major") {
    throw InputError(what + ": layout must be \"row-major\"");
  }
  TensorData t;
  t.kind = r.get<std::string>("kind");
  if (t.kind != "signal" && t.kind != "image") {
    throw InputError(what + ": kind must be \"signal\" or \"image\"");
  }
  t.shape = r.get<std::vector<std::size_t>>("shape");
  if (t.shape.empty() || t.shape.size() > 3) throw InputError(what + ": shape must have 1 to 3 dims");
  std::size_t count = 1;
  for (auto s : t.shape) {
    if (s == 0) throw InputError(what + ": zero-length dimension");
    count *= s;
  }
  r.expect_payload(8 * count);
  t.values.resize(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) t.values[static_cast<Eigen::Index>(i)] = r.f64();
  if (!t.values.allFinite()) throw InputError(what + ": non-finite value in payload");
  return t;
}

inline void save_tensor(const std::string& path, const TensorData& t) { write_file(path, encode_tensor(t)); }
inline TensorData load_tensor(const std::string& path) { return decode_tensor(read_file(path), path); }

// ---------------------------------------------------------------------------
// Measurements

struct MeasurementFile {
  MeasurementRecord record;
  std::size_t rows = 0;  // M
  std::size_t cols = 0;  // N
  std::vector<std::size_t> shape;  // optional original signal shape
};

inline std::string encode_measurement(const MeasurementFile& m) {
  Json header{{"M", m.rows},
              {"N", m.cols},
              {"Q", m.record.spec.bits()},
              {"delta", m.record.spec.step()},
              {"sigma", m.record.sigma},
              {"operator_seed", m.record.operator_seed},
              {"noise_seed", m.record.noise_seed}};
  if (!m.shape.empty()) header["shape"] = m.shape;
  detail::Writer w(header);
  for (auto c : m.record.indices) w.u16(c.value);
  return w.bytes();
}

inline MeasurementFile decode_measurement(std::string bytes, const std::string& what = "measurement file") {
  detail::Reader r(std::move(bytes), what);
  MeasurementFile m;
  m.rows = r.get<std::size_t>("M");
  m.cols = r.get<std::size_t>("N");
  if (m.rows == 0 || m.cols == 0) throw InputError(what + ": M and N must be positive");
  const int q = r.get<int>("Q");
  const double delta = r.get<double>("delta");
  m.record.spec = QuantizerSpec(q, delta);  // ParameterError on invalid Q / delta
  m.record.sigma = r.get<double>("sigma");
  if (!(m.record.sigma >= 0.0)) throw ParameterError(what + ": sigma must be >= 0");
  m.record.operator_seed = r.get<std::uint64_t>("operator_seed");
  m.record.noise_seed = r.get<std::uint64_t>("noise_seed");
  if (r.header().contains("shape")) {
    m.shape = r.get<std::vector<std::size_t>>("shape");
    std::size_t count = 1;
    for (auto s : m.shape) count *= s;
    if (m.shape.empty() || m.shape.size() > 3 || count != m.cols) {
      throw InputError(what + ": shape inconsistent with N");
    }
  }
  r.expect_payload(2 * m.rows);
  m.record.indices.reserve(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const std::uint16_t v = r.u16();
    if (v >= m.record.spec.levels()) {
      throw InputError(what + ": codeword index " + std::to_string(v) + " >= 2^Q");
    }
    m.record.indices.push_back(CodewordIndex{v});
  }
  return m;
}

inline void save_measurement(const std::string& path, const MeasurementFile& m) {
  write_file(path, encode_measurement(m));
}
inline MeasurementFile load_measurement(const std::string& path) {
  return decode_measurement(read_file(path), path);
}

// ---------------------------------------------------------------------------
// Schedules

inline std::string encode_schedule(const StageSchedule& s, double sigma) {
  Json j{{"K", s.stages()}, {"lambdas", s.lambdas}, {"betas", s.betas}, {"sigma", sigma}};
  return j.dump(2) + "\n";
}

struct ScheduleFile {
  StageSchedule schedule;
  double sigma = 0.0;
};

inline ScheduleFile decode_schedule(const std::string& text, const std::string& what = "schedule file") {
  Json j;
  try {
    j = Json::parse(text);
    ScheduleFile f;
    const auto k = j.at("K").get<std::size_t>();
    f.schedule.lambdas = j.at("lambdas").get<std::vector<double>>();
    f.schedule.betas = j.at("betas").get<std::vector<double>>();
    f.sigma = j.at("sigma").get<double>();
    if (f.schedule.lambdas.size() != k || f.schedule.betas.size() != k) {
      throw InputError(what + ": K does not match array lengths");
    }
    f.schedule.validate();
    return f;
  } catch (const Json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

inline void save_schedule(const std::string& path, const StageSchedule& s, double sigma) {
  write_file(path, encode_schedule(s, sigma));
}
inline ScheduleFile load_schedule(const std::string& path) { return decode_schedule(read_file(path), path); }

// ---------------------------------------------------------------------------
// Spectral / DMB parameters

namespace detail {

// delta[G*L], theta[G*L], b[G*L]c, c[G*L]c, u[G*R*L]c, v[G*R*L]c, alpha[G]
inline void write_spectral_sections(Writer& w, const SpectralParams& p, const LowRankCoupling& k) {
  w.f64s(p.delta);
  w.f64s(p.theta);
  w.complexes(p.b);
  w.complexes(p.c);
  w.complexes(k.u);
  w.complexes(k.v);
  w.f64s(k.alpha);
}

inline std::size_t spectral_section_doubles(std::size_t g, std::size_t r, std::size_t l) {
  return 2 * g * l + 4 * g * l + 4 * g * r * l + g;
}

inline void read_spectral_sections(Reader& rd, SpectralParams& p, LowRankCoupling& k) {
  const std::size_t n = p.groups * p.bins();
  p.delta = rd.f64s(n);
  p.theta = rd.f64s(n);
  p.b = rd.complexes(n);
  p.c = rd.complexes(n);
  k.bins = p.bins();
  k.u = rd.complexes(k.groups * k.rank * k.bins);
  k.v = rd.complexes(k.groups * k.rank * k.bins);
  k.alpha = rd.f64s(k.groups);
}

inline void read_spectral_header(const Reader& rd, SpectralParams& p, LowRankCoupling& k,
                                 const std::string& what) {
  p.groups = rd.get<std::size_t>("G");
  p.steps = rd.get<int>("J");
  p.height = rd.get<std::size_t>("H");
  p.width = rd.get<std::size_t>("W");
  k.groups = p.groups;
  k.rank = rd.get<std::size_t>("R");
  k.warmup = rd.get<double>("warmup");
  if (p.groups == 0 || p.height == 0 || p.width == 0) {
    throw InputError(what + ": G, H and W must be positive");
  }
  if (p.steps < 1) throw ParameterError(what + ": J must be >= 1");
}

}  // namespace detail

inline std::string encode_spectral_params(const SpectralParams& p, const LowRankCoupling& k) {
  p.validate();
  k.validate();
  detail::Writer w(Json{{"kind", "spectral"}, {"G", p.groups}, {"R", k.rank}, {"J", p.steps},
                        {"H", p.height}, {"W", p.width}, {"warmup", k.warmup}});
  detail::write_spectral_sections(w, p, k);
  return w.bytes();
}

struct SpectralFile {
  SpectralParams params;
  LowRankCoupling coupling;
};

inline SpectralFile decode_spectral_params(std::string bytes, const std::string& what = "spectral file") {
  detail::Reader rd(std::move(bytes), what);
  if (rd.get<std::string>("kind") != "spectral") throw InputError(what + ": kind must be \"spectral\"");
  SpectralFile f;
  detail::read_spectral_header(rd, f.params, f.coupling, what);
  rd.expect_payload(8 * detail::spectral_section_doubles(f.params.groups, f.coupling.rank,
                                                         f.params.bins()));
  detail::read_spectral_sections(rd, f.params, f.coupling);
  f.params.validate();
  f.coupling.validate();
  return f;
}

// Header carries C, state_dim, G, R, J, H, W, w1, w2, warmup. Payload order:
// norm.scale[C], norm.shift[C], spatial.a[S*S], spatial.b[S*C], spatial.c[C*S],
// spatial.d[C], the spectral sections, ffb.pointwise_in[C*C],
// ffb.depthwise[C*9], ffb.pointwise_out[C*C]; matrices row-major.
inline std::string encode_dmb_params(const DMBParams& p) {
  p.validate();
  detail::Writer w(Json{{"kind", "dmb"},
                        {"C", p.channels},
                        {"state_dim", p.spatial.state_dim()},
                        {"G", p.spectral.groups},
                        {"R", p.coupling.rank},
                        {"J", p.spectral.steps},
                        {"H", p.height},
                        {"W", p.width},
                        {"w1", p.w1},
                        {"w2", p.w2},
                        {"warmup", p.coupling.warmup}});
  w.f64s(p.norm.scale);
  w.f64s(p.norm.shift);
  w.matrix(p.spatial.a);
  w.matrix(p.spatial.b);
  w.matrix(p.spatial.c);
  w.f64s(p.spatial.d_skip);
  detail::write_spectral_sections(w, p.spectral, p.coupling);
  w.matrix(p.ffb.pointwise_in);
  w.matrix(p.ffb.depthwise);
  w.matrix(p.ffb.pointwise_out);
  return w.bytes();
}

// Spatial A is rescaled on load if its spectral radius exceeds 1.
inline DMBParams decode_dmb_params(std::string bytes, const std::string& what = "dmb file") {
  detail::Reader rd(std::move(bytes), what);
  if (rd.get<std::string>("kind") != "dmb") throw InputError(what + ": kind must be \"dmb\"");
  DMBParams p;
  p.channels = rd.get<std::size_t>("C");
  const auto s = rd.get<std::size_t>("state_dim");
  detail::read_spectral_header(rd, p.spectral, p.coupling, what);
  p.height = p.spectral.height;
  p.width = p.spectral.width;
  p.w1 = rd.get<double>("w1");
  p.w2 = rd.get<double>("w2");
  const std::size_t c = p.channels;
  if (c == 0) throw InputError(what + ": C must be positive");
  rd.expect_payload(8 * (2 * c + s * s + 2 * s * c + c +
                         detail::spectral_section_doubles(p.spectral.groups, p.coupling.rank,
                                                          p.spectral.bins()) +
                         2 * c * c + 9 * c));
  p.norm.scale = rd.f64s(c);
  p.norm.shift = rd.f64s(c);
  p.spatial.a = rd.matrix(s, s);
  p.spatial.b = rd.matrix(s, c);
  p.spatial.c = rd.matrix(c, s);
  const auto d = rd.f64s(c);
  p.spatial.d_skip = Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(c));
  detail::read_spectral_sections(rd, p.spectral, p.coupling);
  p.ffb.pointwise_in = rd.matrix(c, c);
  p.ffb.depthwise = rd.matrix(c, 9);
  p.ffb.pointwise_out = rd.matrix(c, c);
  p.spatial.enforce_stability();
  p.validate();
  return p;
}

inline void save_dmb_params(const std::string& path, const DMBParams& p) {
  write_file(path, encode_dmb_params(p));
}
inline DMBParams load_dmb_params(const std::string& path) { return decode_dmb_params(read_file(path), path); }

}  // namespace qcs::io
