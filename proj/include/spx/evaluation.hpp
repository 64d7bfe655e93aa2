#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spx/corpus.hpp"
#include "spx/manifest.hpp"
#include "spx/model.hpp"
#include "spx/stft.hpp"

namespace spx {

/// si_sdr(target, estimate) - si_sdr(target, mixture).
double si_sdri(const AudioBuffer& target, const AudioBuffer& estimate, const AudioBuffer& mixture);

/// estimate = s_target + e_interf + e_artif, where s_target is the
/// projection onto span{target} and s_target + e_interf the projection onto
/// span{target, interference}.
struct Decomposition {
  std::vector<double> s_target;
  std::vector<double> e_interf;
  std::vector<double> e_artif;
};

/// Throws kDecomposition when target and interference are (numerically)
/// collinear or zero, kInvalidArgument on length mismatch.
Decomposition decompose(std::span<const double> estimate, std::span<const double> target,
                        std::span<const double> interference);

/// 10 log10(|s_target|^2 / |e_interf + e_artif|^2), clamped to +-kSiSdrCapDb.
double sdr(const Decomposition& d);
/// 10 log10(|s_target|^2 / |e_interf|^2), clamped to +-kSiSdrCapDb.
double sir(const Decomposition& d);

/// |STFT(target)| with the mixture phase, resynthesized at the mixture length.
AudioBuffer oracle_mask_baseline(const AudioBuffer& target, const AudioBuffer& mixture,
                                 const StftConfig& stft = {});

enum class SystemTag { kMixture, kOracle, kProposed, kProposedLs };

std::string to_string(SystemTag tag);
/// Throws kConfig for an unknown tag.
SystemTag parse_system(const std::string& s);

struct EvalRecord {
  std::size_t example = 0;
  int speaker = 1;
  std::string speaker_id;
  double si_sdr = 0.0;
  double si_sdri = 0.0;
  double sdr = 0.0;
  double sir = 0.0;
  std::optional<double> snr_db;
  std::optional<double> t60;
};

struct MetricSummary {
  double mean = 0.0;
  double median = 0.0;
};

struct EvalReport {
  SystemTag system = SystemTag::kMixture;
  std::vector<EvalRecord> records;
  MetricSummary si_sdr, si_sdri, sdr, sir;
};

struct EvalOptions {
  StftConfig stft;
  /// When set, estimates are written as exNNNN_spkK.wav here.
  std::optional<std::filesystem::path> dump_dir;
};

/// Scores both speakers of every example. Proposed systems need a network
/// whose feature mode matches the tag (kCheckpoint otherwise).
EvalReport evaluate_system(SystemTag system, const DatasetManifest& manifest, const Network<float>* net,
                           const EvalOptions& options = {});
EvalReport evaluate_examples(SystemTag system, const std::vector<MixtureExample>& examples,
                             const Network<float>* net, const EvalOptions& options = {});

/// Fills the aggregate fields from the records.
void summarize(EvalReport& report);

/// One JSON object per record followed by a summary object.
void write_report(const EvalReport& report, const std::filesystem::path& path);
std::string format_summary(const EvalReport& report);

}  // namespace spx
