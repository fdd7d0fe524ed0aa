#include "crcseg/npy.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>
#include <optional>

#include "crcseg/error.hpp"
#include "file_util.hpp"

namespace crcseg {

namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreamble = 10; // magic + version + u16 header length
constexpr std::size_t kMaxExtent = std::numeric_limits<int>::max();

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::MalformedHeader, what);
}

/// Recursive-descent reader for the Python dict literal in the header.
class HeaderDict {
public:
  explicit HeaderDict(std::string_view text) : text_(text) {}

  NpyHeader parse() {
    NpyHeader h;
    bool have_descr = false, have_order = false, have_shape = false;
    skip_ws();
    expect('{');
    for (;;) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = parse_string();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        if (have_descr)
          malformed("duplicate key 'descr'");
        h.descr = parse_string();
        have_descr = true;
      } else if (key == "fortran_order") {
        if (have_order)
          malformed("duplicate key 'fortran_order'");
        h.fortran_order = parse_bool();
        have_order = true;
      } else if (key == "shape") {
        if (have_shape)
          malformed("duplicate key 'shape'");
        h.shape = parse_shape();
        have_shape = true;
      } else {
        malformed("unexpected key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      expect('}');
      break;
    }
    skip_ws();
    if (pos_ != text_.size())
      malformed("trailing characters after header dictionary");
    if (!have_descr || !have_order || !have_shape)
      malformed("header lacks one of 'descr', 'fortran_order', 'shape'");
    return h;
  }

private:
  char peek() const {
    if (pos_ >= text_.size())
      malformed("header ends unexpectedly");
    return text_[pos_];
  }

  void expect(char c) {
    if (peek() != c)
      malformed(std::string("expected '") + c + "' at offset " + std::to_string(pos_));
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
            text_[pos_] == '\r'))
      ++pos_;
  }

  std::string parse_string() {
    const char quote = peek();
    if (quote != '\'' && quote != '"')
      malformed("expected a quoted string at offset " + std::to_string(pos_));
    ++pos_;
    const auto end = text_.find(quote, pos_);
    if (end == std::string_view::npos)
      malformed("unterminated string");
    std::string s(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return s;
  }

  bool parse_bool() {
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    malformed("fortran_order must be True or False");
  }

  std::size_t parse_uint() {
    std::size_t v = 0;
    std::size_t digits = 0;
    while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
      v = v * 10 + static_cast<std::size_t>(text_[pos_] - '0');
      ++pos_;
      if (++digits > 12)
        malformed("shape extent too large");
    }
    // Python 2 long suffix.
    if (digits > 0 && pos_ < text_.size() && text_[pos_] == 'L')
      ++pos_;
    if (digits == 0)
      malformed("expected an integer at offset " + std::to_string(pos_));
    return v;
  }

  std::vector<std::size_t> parse_shape() {
    std::vector<std::size_t> shape;
    expect('(');
    skip_ws();
    if (peek() == ')') {
      ++pos_;
      return shape;
    }
    for (;;) {
      skip_ws();
      shape.push_back(parse_uint());
      if (shape.size() > 32)
        malformed("too many shape axes");
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        skip_ws();
        if (peek() == ')') {
          ++pos_;
          break;
        }
        continue;
      }
      expect(')');
      break;
    }
    return shape;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::uint16_t load_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void check_layout(const NpyHeader& h, std::initializer_list<std::string_view> descrs,
                  std::size_t rank) {
  if (std::find(descrs.begin(), descrs.end(), h.descr) == descrs.end()) {
    std::string allowed;
    for (auto d : descrs)
      allowed += (allowed.empty() ? "" : ", ") + std::string(d);
    throw Error(ErrorCode::UnsupportedDescriptor,
                "descriptor '" + h.descr + "' not supported (expected " + allowed + ")");
  }
  if (h.fortran_order)
    throw Error(ErrorCode::FortranOrderUnsupported, "only C-order arrays are supported");
  if (h.shape.size() != rank)
    throw Error(ErrorCode::ShapeRankError,
                "expected " + std::to_string(rank) + " axes, got " +
                    std::to_string(h.shape.size()));
  for (auto e : h.shape)
    if (e == 0 || e > kMaxExtent)
      throw Error(ErrorCode::ShapeRankError,
                  "shape extent " + std::to_string(e) + " out of range");
}

std::span<const std::uint8_t> payload(std::span<const std::uint8_t> bytes,
                                      const NpyHeader& h, std::size_t item_size) {
  const std::size_t count = h.element_count();
  if (count > (std::numeric_limits<std::size_t>::max() / item_size))
    throw Error(ErrorCode::ShapeRankError, "array too large");
  const std::size_t need = count * item_size;
  const std::size_t have = bytes.size() - h.data_offset;
  if (have < need)
    throw Error(ErrorCode::TruncatedData, "data holds " + std::to_string(have) +
                                              " bytes, header declares " +
                                              std::to_string(need));
  if (have > need)
    throw Error(ErrorCode::TruncatedData, std::to_string(have - need) +
                                              " unexpected bytes after array data");
  return bytes.subspan(h.data_offset, need);
}

std::vector<std::uint8_t> with_header(const std::string& descr,
                                      std::initializer_list<std::size_t> shape,
                                      std::size_t data_bytes) {
  const std::vector<std::size_t> dims(shape);
  auto out = make_npy_header(descr, dims);
  out.reserve(out.size() + data_bytes);
  return out;
}

} // namespace

std::size_t NpyHeader::element_count() const {
  std::size_t n = 1;
  for (auto e : shape) {
    if (e != 0 && n > std::numeric_limits<std::size_t>::max() / e)
      throw Error(ErrorCode::ShapeRankError, "array too large");
    n *= e;
  }
  return n;
}

NpyHeader parse_npy_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || !std::equal(kMagic, kMagic + 6, bytes.begin()))
    throw Error(ErrorCode::BadMagic, "not an NPY file");
  if (bytes.size() < kPreamble)
    throw Error(ErrorCode::TruncatedData, "NPY preamble truncated");
  if (bytes[6] != 1 || bytes[7] != 0)
    throw Error(ErrorCode::UnsupportedVersion,
                "NPY version " + std::to_string(bytes[6]) + "." +
                    std::to_string(bytes[7]) + " not supported (only 1.0)");
  const std::size_t len = load_u16(bytes.data() + 8);
  if (bytes.size() < kPreamble + len)
    throw Error(ErrorCode::TruncatedData, "NPY header truncated");
  const std::string_view text(reinterpret_cast<const char*>(bytes.data() + kPreamble), len);
  if (text.empty() || text.back() != '\n')
    malformed("header must end with a newline");
  for (char c : text)
    if (static_cast<unsigned char>(c) > 0x7F || (c < 0x20 && c != '\n' && c != '\t' && c != '\r'))
      malformed("header contains non-ASCII or control bytes");
  NpyHeader h = HeaderDict(text).parse();
  h.data_offset = kPreamble + len;
  return h;
}

std::vector<std::uint8_t> make_npy_header(const std::string& descr,
                                          std::span<const std::size_t> shape) {
  std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    dict += std::to_string(shape[i]);
    if (i + 1 < shape.size() || shape.size() == 1)
      dict += ",";
    if (i + 1 < shape.size())
      dict += " ";
  }
  dict += "), }";
  const std::size_t unpadded = kPreamble + dict.size() + 1;
  const std::size_t padded = (unpadded + 63) / 64 * 64;
  dict.append(padded - unpadded, ' ');
  dict += '\n';
  if (dict.size() > std::numeric_limits<std::uint16_t>::max())
    throw Error(ErrorCode::InvalidArgument, "NPY header too long");

  std::vector<std::uint8_t> out(kMagic, kMagic + 6);
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<std::uint8_t>(dict.size() & 0xFF));
  out.push_back(static_cast<std::uint8_t>(dict.size() >> 8));
  out.insert(out.end(), dict.begin(), dict.end());
  return out;
}

ScoreTensor parse_scores(std::span<const std::uint8_t> bytes, bool validate) {
  const NpyHeader h = parse_npy_header(bytes);
  check_layout(h, {"<f4"}, 3);
  if (h.shape[0] < 2)
    throw Error(ErrorCode::ShapeRankError, "score tensors need at least 2 classes");
  const auto data = payload(bytes, h, 4);
  std::vector<float> values(h.element_count());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint8_t* p = data.data() + 4 * i;
    const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                            (static_cast<std::uint32_t>(p[1]) << 8) |
                            (static_cast<std::uint32_t>(p[2]) << 16) |
                            (static_cast<std::uint32_t>(p[3]) << 24);
    values[i] = std::bit_cast<float>(u);
  }
  const Dims dims{static_cast<int>(h.shape[0]), static_cast<int>(h.shape[1]),
                  static_cast<int>(h.shape[2])};
  return ScoreTensor(dims, std::move(values), validate);
}

std::vector<std::uint8_t> encode_scores(const ScoreTensor& scores) {
  const Dims& d = scores.dims();
  auto out = with_header("<f4",
                         {static_cast<std::size_t>(d.k), static_cast<std::size_t>(d.h),
                          static_cast<std::size_t>(d.w)},
                         d.size() * 4);
  for (float v : scores.values()) {
    const auto u = std::bit_cast<std::uint32_t>(v);
    out.push_back(static_cast<std::uint8_t>(u));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
    out.push_back(static_cast<std::uint8_t>(u >> 16));
    out.push_back(static_cast<std::uint8_t>(u >> 24));
  }
  return out;
}

ScoreTensor read_scores(const std::filesystem::path& path, bool validate) {
  return parse_scores(detail::read_file(path), validate);
}

void write_scores(const std::filesystem::path& path, const ScoreTensor& scores) {
  detail::write_file(path, encode_scores(scores));
}

LabelImage parse_labels(std::span<const std::uint8_t> bytes) {
  const NpyHeader h = parse_npy_header(bytes);
  check_layout(h, {"|u1", "<u1", "<u2"}, 2);
  const bool wide = h.descr == "<u2";
  const auto data = payload(bytes, h, wide ? 2 : 1);
  LabelImage img;
  img.h = static_cast<int>(h.shape[0]);
  img.w = static_cast<int>(h.shape[1]);
  img.labels.resize(h.element_count());
  if (wide) {
    for (std::size_t i = 0; i < img.labels.size(); ++i)
      img.labels[i] = load_u16(data.data() + 2 * i);
  } else {
    for (std::size_t i = 0; i < img.labels.size(); ++i)
      img.labels[i] = data[i] == 0xFF ? kIgnore : data[i];
  }
  return img;
}

std::vector<std::uint8_t> encode_mask(const GroundTruthMask& mask) {
  const Dims& d = mask.dims();
  const bool narrow = d.k <= 255;
  auto out = with_header(narrow ? "|u1" : "<u2",
                         {static_cast<std::size_t>(d.h), static_cast<std::size_t>(d.w)},
                         d.pixels() * (narrow ? 1 : 2));
  for (Label l : mask.labels()) {
    if (narrow) {
      out.push_back(l == kIgnore ? 0xFF : static_cast<std::uint8_t>(l));
    } else {
      out.push_back(static_cast<std::uint8_t>(l & 0xFF));
      out.push_back(static_cast<std::uint8_t>(l >> 8));
    }
  }
  return out;
}

LabelImage read_labels(const std::filesystem::path& path) {
  return parse_labels(detail::read_file(path));
}

GroundTruthMask read_mask(const std::filesystem::path& path, int k) {
  auto img = read_labels(path);
  return GroundTruthMask(Dims{k, img.h, img.w}, std::move(img.labels));
}

void write_mask(const std::filesystem::path& path, const GroundTruthMask& mask) {
  detail::write_file(path, encode_mask(mask));
}

MultiMask parse_multimask(std::span<const std::uint8_t> bytes) {
  const NpyHeader h = parse_npy_header(bytes);
  check_layout(h, {"|u1", "<u1"}, 3);
  if (h.shape[0] < 2)
    throw Error(ErrorCode::ShapeRankError, "multi-labeled masks need at least 2 classes");
  const auto data = payload(bytes, h, 1);
  const Dims dims{static_cast<int>(h.shape[0]), static_cast<int>(h.shape[1]),
                  static_cast<int>(h.shape[2])};
  return MultiMask(dims, std::vector<std::uint8_t>(data.begin(), data.end()));
}

std::vector<std::uint8_t> encode_multimask(const MultiMask& z) {
  const Dims& d = z.dims();
  auto out = with_header("|u1",
                         {static_cast<std::size_t>(d.k), static_cast<std::size_t>(d.h),
                          static_cast<std::size_t>(d.w)},
                         d.size());
  out.insert(out.end(), z.bits().begin(), z.bits().end());
  return out;
}

MultiMask read_multimask(const std::filesystem::path& path) {
  return parse_multimask(detail::read_file(path));
}

void write_multimask(const std::filesystem::path& path, const MultiMask& z) {
  detail::write_file(path, encode_multimask(z));
}

} // namespace crcseg
