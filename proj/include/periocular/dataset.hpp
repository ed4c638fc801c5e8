#ifndef PERIOCULAR_DATASET_HPP
#define PERIOCULAR_DATASET_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "periocular/image.hpp"

namespace periocular {

enum class Gender { female, male };
enum class Eye { left, right };

/// Class label convention used throughout: male = -1, female = +1.
constexpr int label_of(Gender g) noexcept { return g == Gender::female ? +1 : -1; }

std::string_view to_string(Gender g) noexcept;
std::string_view to_string(Eye e) noexcept;

struct SampleRecord {
  std::string image_path;
  std::string subject_id;
  Gender gender = Gender::female;
  Eye eye = Eye::left;
  std::optional<std::string> session;
  std::optional<OcclusionCircle> occlusion;

  bool operator==(const SampleRecord&) const = default;
};

/// Parses the manifest CSV (`path,subject_id,gender,eye,session,cx,cy,r`).
/// Rows are numbered from 1 at the header, so the first data row is row 2.
std::vector<SampleRecord> load_manifest(std::string_view csv);

/// Renders records back to manifest CSV; load_manifest(write_manifest(r)) == r.
std::string write_manifest(const std::vector<SampleRecord>& records);

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> validation;

  bool operator==(const Fold&) const = default;
};

/// Person-disjoint partition. Subject lists are kept sorted.
struct SplitPlan {
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
  std::vector<Fold> folds;
  std::uint64_t seed = 0;
  double train_fraction = 0.0;
  int k = 0;

  bool operator==(const SplitPlan&) const = default;
};

/// Gender-balanced, subject-level split with k folds over the train subjects.
/// Per gender, round-half-even(train_fraction * n_g) subjects go to train.
SplitPlan make_split(const std::vector<SampleRecord>& records, double train_fraction, int k, std::uint64_t seed);

/// Throws InvariantError if any subject sits on both sides of the split or
/// of any fold.
void audit_split(const SplitPlan& plan);

std::string split_to_json(const SplitPlan& plan);
SplitPlan split_from_json(std::string_view text);

}  // namespace periocular

#endif  // PERIOCULAR_DATASET_HPP
