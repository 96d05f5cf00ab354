#include "ttsrl/prosody.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "ttsrl/errors.hpp"
#include "ttsrl/rng.hpp"

namespace ttsrl {

using ordered_json = nlohmann::ordered_json;

const char* pause_scheme_name(PauseScheme scheme) {
  return scheme == PauseScheme::kNumeric ? "numeric" : "pw_pph";
}

PauseScheme parse_pause_scheme(const std::string& name) {
  if (name == "numeric") return PauseScheme::kNumeric;
  if (name == "pw_pph") return PauseScheme::kPwPph;
  throw ValidationError("unknown pause scheme: " + name);
}

namespace {

int max_level(PauseScheme scheme) {
  return scheme == PauseScheme::kNumeric ? kNumPauseLevels : kPphLevel;
}

}  // namespace

void validate_pause_sequence(const PauseSequence& seq) {
  int prev_pos = -1;
  for (const PauseMarker& m : seq.markers) {
    if (m.position <= prev_pos)
      throw ConfigError("pause marker positions must be strictly increasing");
    if (m.level < 1 || m.level > max_level(seq.scheme))
      throw ConfigError("pause marker level outside scheme range");
    prev_pos = m.position;
  }
}

PauseSequence map_silences_to_markers(const std::vector<SilenceSegment>& silences,
                                      const std::array<double, kNumPauseLevels>& thresholds) {
  for (int i = 1; i < kNumPauseLevels; ++i) {
    if (!(thresholds[i] > thresholds[i - 1]))
      throw ConfigError("pause thresholds must be strictly ascending");
  }
  PauseSequence seq;
  seq.scheme = PauseScheme::kNumeric;
  for (const SilenceSegment& s : silences) {
    if (!(s.duration > 0.0)) throw ConfigError("silence duration must be positive");
    int level = 0;
    for (int l = 0; l < kNumPauseLevels; ++l) {
      if (s.duration >= thresholds[l]) level = l + 1;
    }
    if (level > 0) seq.markers.push_back({s.position, level});
  }
  validate_pause_sequence(seq);
  return seq;
}

PauseSequence convert_scheme(const PauseSequence& seq, PauseScheme target,
                             const ProsodyConfig& cfg) {
  if (seq.scheme == target) return seq;
  if (seq.scheme == PauseScheme::kNumeric && target == PauseScheme::kPwPph) {
    PauseSequence out;
    out.scheme = PauseScheme::kPwPph;
    for (const PauseMarker& m : seq.markers) {
      out.markers.push_back({m.position, m.level <= cfg.pw_max_level ? kPwLevel : kPphLevel});
    }
    return out;
  }
  throw ConfigError("unsupported pause scheme conversion");
}

std::vector<PauseSequence> RuleAnnotator::annotate(const Text& text, int max_candidates) {
  if (max_candidates < 1) throw ConfigError("need at least one candidate");
  PauseSequence seq;
  seq.scheme = PauseScheme::kNumeric;
  const int n = static_cast<int>(text.length());
  int run = 0;
  int clause_breaks = 0;
  for (int i = 0; i < n; ++i) {
    const int sym = text.symbols[i];
    if (sym == alphabet_.period) {
      seq.markers.push_back({i + 1, 4});
      run = 0;
      clause_breaks = 0;
    } else if (sym == alphabet_.comma) {
      seq.markers.push_back({i + 1, 3});
      run = 0;
      clause_breaks = 0;
    } else {
      ++run;
      if (run == 6 && i + 1 < n) {
        seq.markers.push_back({i + 1, clause_breaks % 2 == 0 ? 1 : 2});
        run = 0;
        ++clause_breaks;
      }
    }
  }
  validate_pause_sequence(seq);
  if (scheme_ == PauseScheme::kPwPph) seq = convert_scheme(seq, PauseScheme::kPwPph, cfg_);
  return {seq};
}

std::vector<PauseSequence> StochasticAnnotator::annotate(const Text& text, int max_candidates) {
  std::vector<PauseSequence> base = rule_.annotate(text, 1);
  std::vector<PauseSequence> out = {base[0]};
  Rng rng = Rng::stream(seed_, {rng_tag::kAnnotate, call_index_++});
  const int lmax = scheme_ == PauseScheme::kNumeric ? kNumPauseLevels : kPphLevel;
  for (int c = 1; c < max_candidates; ++c) {
    PauseSequence variant = base[0];
    for (PauseMarker& m : variant.markers) {
      if (rng.next_double() < 0.5) {
        int delta = rng.next_double() < 0.5 ? -1 : 1;
        m.level = std::clamp(m.level + delta, 1, lmax);
      }
    }
    if (std::find(out.begin(), out.end(), variant) == out.end()) out.push_back(variant);
  }
  return out;
}

namespace {

ordered_json pattern_to_json(const PauseSequence& seq) {
  ordered_json arr = ordered_json::array();
  for (const PauseMarker& m : seq.markers) arr.push_back({m.position, m.level});
  return arr;
}

PauseSequence pattern_from_json(const ordered_json& arr, PauseScheme scheme) {
  PauseSequence seq;
  seq.scheme = scheme;
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2)
      throw ValidationError("pattern entry must be a [position, level] pair");
    seq.markers.push_back({pair[0].get<int>(), pair[1].get<int>()});
  }
  validate_pause_sequence(seq);
  return seq;
}

}  // namespace

std::map<int64_t, PauseTemplateSet> load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open template file: " + path);

  std::map<int64_t, PauseTemplateSet> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    PauseTemplateSet set;
    try {
      ordered_json rec = ordered_json::parse(line);
      set.text_id = rec.at("text_id").get<int64_t>();
      set.scheme = parse_pause_scheme(rec.at("scheme").get<std::string>());
      for (const auto& pat : rec.at("patterns")) {
        PauseSequence seq = pattern_from_json(pat, set.scheme);
        if (std::find(set.templates.begin(), set.templates.end(), seq) == set.templates.end())
          set.templates.push_back(seq);
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw ValidationError("template file " + path + " line " + std::to_string(line_no) +
                            ": " + e.what());
    }
    if (set.templates.empty())
      throw ValidationError("template file " + path + " line " + std::to_string(line_no) +
                            ": record has no patterns");
    if (out.count(set.text_id)) {
      std::cerr << "[ttsrl] warning: duplicate text_id " << set.text_id << " in " << path
                << " line " << line_no << " (last record wins)\n";
    }
    out[set.text_id] = std::move(set);
  }
  return out;
}

AnnotateReport annotate_offline(const std::vector<AnnotationInput>& texts,
                                AnnotatorInterface& annotator, int candidates_per_text,
                                const std::string& out_path) {
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw ValidationError("cannot open template file for writing: " + out_path);

  AnnotateReport report;
  for (const AnnotationInput& input : texts) {
    std::vector<PauseSequence> candidates;
    try {
      candidates = annotator.annotate(input.text, candidates_per_text);
      if (candidates.empty()) throw ValidationError("annotator returned no candidates");
      for (const PauseSequence& c : candidates) validate_pause_sequence(c);
    } catch (const std::exception& e) {
      std::cerr << "[ttsrl] warning: skipping text_id " << input.text_id << ": " << e.what()
                << "\n";
      ++report.skipped;
      continue;
    }
    ordered_json rec;
    rec["text_id"] = input.text_id;
    rec["scheme"] = pause_scheme_name(annotator.scheme());
    rec["text"] = input.text.symbols;
    ordered_json patterns = ordered_json::array();
    // Deduplicate while preserving candidate order.
    std::vector<PauseSequence> unique;
    for (const PauseSequence& c : candidates) {
      if (std::find(unique.begin(), unique.end(), c) == unique.end()) {
        unique.push_back(c);
        patterns.push_back(pattern_to_json(c));
      }
    }
    rec["patterns"] = patterns;
    out << rec.dump() << "\n";
    ++report.written;
  }
  return report;
}

}  // namespace ttsrl
