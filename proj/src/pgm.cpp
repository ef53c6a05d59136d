#include "thermoloss/pgm.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include "thermoloss/error.hpp"

namespace thermoloss {

namespace {

constexpr unsigned kThermalMaxval = 65535;
constexpr unsigned kMaskMaxval = 255;

struct PgmHeader {
  bool binary = false;
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned maxval = 0;
  std::size_t payload_offset = 0;
};

class Cursor {
 public:
  explicit Cursor(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  // Reads an unsigned decimal token. Returns false at end of input.
  bool read_unsigned(std::uint64_t& out, ParseErrorKind on_garbage) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) return false;
    if (!std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw ParseError(on_garbage, "pgm: expected unsigned integer");
    }
    std::uint64_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + static_cast<std::uint64_t>(bytes_[pos_] - '0');
      if (v > 0xFFFFFFFFULL) throw ParseError(on_garbage, "pgm: integer too large");
      ++pos_;
    }
    out = v;
    return true;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

PgmHeader parse_header(std::string_view bytes, Cursor& cur) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw ParseError(ParseErrorKind::kMalformedHeader, "pgm: magic must be P2 or P5");
  }
  PgmHeader h;
  h.binary = bytes[1] == '5';
  cur.advance(2);
  std::uint64_t w = 0, ht = 0, mv = 0;
  if (!cur.read_unsigned(w, ParseErrorKind::kMalformedHeader) ||
      !cur.read_unsigned(ht, ParseErrorKind::kMalformedHeader) ||
      !cur.read_unsigned(mv, ParseErrorKind::kMalformedHeader)) {
    throw ParseError(ParseErrorKind::kMalformedHeader, "pgm: incomplete header");
  }
  if (w == 0 || ht == 0) {
    throw ParseError(ParseErrorKind::kMalformedHeader, "pgm: zero width or height");
  }
  if (mv == 0 || mv > 65535) {
    throw ParseError(ParseErrorKind::kMalformedHeader, "pgm: maxval out of range");
  }
  h.width = w;
  h.height = ht;
  h.maxval = static_cast<unsigned>(mv);
  if (h.binary) {
    // Exactly one whitespace byte separates the header from the raster.
    if (cur.remaining() == 0) {
      throw ParseError(ParseErrorKind::kTruncatedPayload, "pgm: missing raster");
    }
    if (!std::isspace(static_cast<unsigned char>(bytes[cur.pos()]))) {
      throw ParseError(ParseErrorKind::kMalformedHeader, "pgm: no separator after maxval");
    }
    cur.advance(1);
  }
  h.payload_offset = cur.pos();
  return h;
}

std::vector<std::uint32_t> read_samples(std::string_view bytes, const PgmHeader& h,
                                        Cursor& cur) {
  const std::size_t n = h.width * h.height;
  std::vector<std::uint32_t> samples(n);
  if (h.binary) {
    const std::size_t bps = h.maxval > 255 ? 2 : 1;
    if (cur.remaining() < n * bps) {
      throw ParseError(ParseErrorKind::kTruncatedPayload, "pgm: raster shorter than header declares");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload_offset);
    for (std::size_t i = 0; i < n; ++i) {
      samples[i] = bps == 2 ? (static_cast<std::uint32_t>(p[2 * i]) << 8) | p[2 * i + 1]
                            : p[i];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t v = 0;
      if (!cur.read_unsigned(v, ParseErrorKind::kBadValue)) {
        throw ParseError(ParseErrorKind::kTruncatedPayload, "pgm: fewer samples than header declares");
      }
      samples[i] = static_cast<std::uint32_t>(v);
    }
  }
  for (auto s : samples) {
    if (s > h.maxval) throw ParseError(ParseErrorKind::kBadValue, "pgm: sample exceeds maxval");
  }
  return samples;
}

std::string encode(std::size_t width, std::size_t height, unsigned maxval,
                   const std::vector<std::uint32_t>& samples, PgmFormat format) {
  std::ostringstream os;
  os << (format == PgmFormat::kBinary ? "P5" : "P2") << '\n'
     << width << ' ' << height << '\n'
     << maxval << '\n';
  std::string out = os.str();
  if (format == PgmFormat::kBinary) {
    const bool wide = maxval > 255;
    out.reserve(out.size() + samples.size() * (wide ? 2 : 1));
    for (auto s : samples) {
      if (wide) out.push_back(static_cast<char>((s >> 8) & 0xFF));
      out.push_back(static_cast<char>(s & 0xFF));
    }
  } else {
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        if (c) out.push_back(' ');
        out += std::to_string(samples[r * width + c]);
      }
      out.push_back('\n');
    }
  }
  return out;
}

}  // namespace

ThermalImage decode_thermal_pgm(std::string_view bytes) {
  Cursor cur(bytes);
  const PgmHeader h = parse_header(bytes, cur);
  if (h.maxval != kThermalMaxval) {
    throw ParseError(ParseErrorKind::kUnsupportedMaxval, "pgm: thermal images need maxval 65535");
  }
  const auto samples = read_samples(bytes, h, cur);
  ThermalImage img(h.height, h.width);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    img.pixels.values[i] = static_cast<double>(samples[i]) / kThermalMaxval;
  }
  return img;
}

std::string encode_thermal_pgm(const ThermalImage& img, PgmFormat format) {
  img.validate();
  std::vector<std::uint32_t> samples(img.pixels.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<std::uint32_t>(std::lround(img.pixels.values[i] * kThermalMaxval));
  }
  return encode(img.width(), img.height(), kThermalMaxval, samples, format);
}

SegmentationMask decode_mask_pgm(std::string_view bytes) {
  Cursor cur(bytes);
  const PgmHeader h = parse_header(bytes, cur);
  if (h.maxval != kMaskMaxval) {
    throw ParseError(ParseErrorKind::kUnsupportedMaxval, "pgm: segmentation masks need maxval 255");
  }
  const auto samples = read_samples(bytes, h, cur);
  SegmentationMask mask(h.height, h.width);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i] >= static_cast<std::uint32_t>(kNumRegions)) {
      throw ParseError(ParseErrorKind::kBadValue, "pgm: segmentation label outside [0, 17]");
    }
    mask.labels[i] = static_cast<std::uint8_t>(samples[i]);
  }
  return mask;
}

std::string encode_mask_pgm(const SegmentationMask& mask, PgmFormat format) {
  mask.validate();
  std::vector<std::uint32_t> samples(mask.labels.begin(), mask.labels.end());
  return encode(mask.width, mask.height, kMaskMaxval, samples, format);
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

ThermalImage load_thermal_pgm(const std::filesystem::path& path) {
  return decode_thermal_pgm(read_file_bytes(path));
}

void save_thermal_pgm(const ThermalImage& img, const std::filesystem::path& path,
                      PgmFormat format) {
  write_file_bytes(path, encode_thermal_pgm(img, format));
}

SegmentationMask load_mask_pgm(const std::filesystem::path& path) {
  return decode_mask_pgm(read_file_bytes(path));
}

void save_mask_pgm(const SegmentationMask& mask, const std::filesystem::path& path,
                   PgmFormat format) {
  write_file_bytes(path, encode_mask_pgm(mask, format));
}

}  // namespace thermoloss
