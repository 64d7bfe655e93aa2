#include "spx/audio.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "spx/error.hpp"

namespace spx {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kSamplingFailure: return "sampling-failure";
    case ErrorKind::kInvalidScene: return "invalid-scene";
    case ErrorKind::kEstimationFailure: return "estimation-failure";
    case ErrorKind::kEmptyCorpus: return "empty-corpus";
    case ErrorKind::kManifestIntegrity: return "manifest-integrity";
    case ErrorKind::kCheckpoint: return "checkpoint";
    case ErrorKind::kUnsupportedVersion: return "unsupported-version";
    case ErrorKind::kDecomposition: return "decomposition";
    case ErrorKind::kTrainingStep: return "training-step";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

void validate(const AudioBuffer& audio) {
  require(audio.sample_rate > 0.0, "sample rate must be positive");
  require(std::all_of(audio.samples.begin(), audio.samples.end(),
                      [](double v) { return std::isfinite(v); }),
          "audio contains non-finite samples");
}

double energy(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

double power(std::span<const double> x) {
  return x.empty() ? 0.0 : energy(x) / static_cast<double>(x.size());
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  auto bad = [&](const std::string& why) -> void {
    fail(ErrorKind::kFormat, path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    bad("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const auto size = read_le<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) bad("short fmt chunk");
      format = read_le<std::uint16_t>(chunk + 8);
      channels = read_le<std::uint16_t>(chunk + 10);
      rate = read_le<std::uint32_t>(chunk + 12);
      bits = read_le<std::uint16_t>(chunk + 22);
      if (format == kFormatExtensible && avail >= 26) {
        format = read_le<std::uint16_t>(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = avail;
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || data == nullptr) bad("missing fmt or data chunk");
  if (channels != 1) bad("expected mono, found " + std::to_string(channels) + " channels");
  if (rate == 0) bad("zero sample rate");

  AudioBuffer out;
  out.sample_rate = rate;
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_size / 2;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = read_le<std::int16_t>(data + 2 * i) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = data_size / 4;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = read_le<float>(data + 4 * i);
    }
  } else {
    bad("unsupported encoding (format " + std::to_string(format) + ", " +
        std::to_string(bits) + " bits)");
  }
  validate(out);
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding) {
  validate(audio);
  const bool is_float = encoding == WavEncoding::kFloat32;
  const std::uint16_t bytes_per_sample = is_float ? 4 : 2;
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  const auto data_size = static_cast<std::uint32_t>(audio.size() * bytes_per_sample);

  std::string out;
  out.reserve(44 + data_size);
  out.append("RIFF");
  put<std::uint32_t>(out, 36 + data_size);
  out.append("WAVEfmt ");
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, is_float ? kFormatFloat : kFormatPcm);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, rate);
  put<std::uint32_t>(out, rate * bytes_per_sample);
  put<std::uint16_t>(out, bytes_per_sample);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(8 * bytes_per_sample));
  out.append("data");
  put<std::uint32_t>(out, data_size);
  for (double v : audio.samples) {
    if (is_float) {
      put<float>(out, static_cast<float>(v));
    } else {
      const double clipped = std::clamp(v, -1.0, 32767.0 / 32768.0);
      put<std::int16_t>(out, static_cast<std::int16_t>(std::lround(clipped * 32768.0)));
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) fail(ErrorKind::kIo, "cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) fail(ErrorKind::kIo, "short write to " + path.string());
}

}  // namespace spx
