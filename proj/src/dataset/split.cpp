#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "periocular/common.hpp"
#include "periocular/dataset.hpp"

namespace periocular {

namespace {

std::size_t round_half_even(double v) {
  const double fl = std::floor(v);
  const double frac = v - fl;
  auto n = static_cast<std::size_t>(fl);
  if (frac > 0.5 || (frac == 0.5 && n % 2 == 1)) ++n;
  return n;
}

}  // namespace

SplitPlan make_split(const std::vector<SampleRecord>& records, double train_fraction, int k, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train_fraction must lie in (0, 1)");
  if (k < 2) throw ArgumentError("fold count k must be at least 2");

  std::map<std::string, Gender> subject_gender;
  for (const auto& r : records) {
    const auto [it, inserted] = subject_gender.emplace(r.subject_id, r.gender);
    if (!inserted && it->second != r.gender) {
      throw DataError("subject '" + r.subject_id + "' is labeled with both genders");
    }
  }

  // std::map iteration gives a sorted, seed-independent starting order.
  std::vector<std::string> by_gender[2];
  for (const auto& [subject, gender] : subject_gender) {
    by_gender[gender == Gender::female ? 0 : 1].push_back(subject);
  }

  Rng rng(seed);
  SplitPlan plan;
  plan.seed = seed;
  plan.train_fraction = train_fraction;
  plan.k = k;

  std::vector<std::string> train_order;  // shuffled, females first
  for (auto& subjects : by_gender) {
    const std::size_t n = subjects.size();
    const std::size_t n_train = round_half_even(train_fraction * static_cast<double>(n));
    if (n_train < static_cast<std::size_t>(k)) {
      throw ArgumentError("too few subjects for " + std::to_string(k) + " folds: a gender has " + std::to_string(n) +
                          " subjects, " + std::to_string(n_train) + " of them in train");
    }
    rng.shuffle(subjects);
    train_order.insert(train_order.end(), subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_train));
    plan.test_subjects.insert(plan.test_subjects.end(), subjects.begin() + static_cast<std::ptrdiff_t>(n_train),
                              subjects.end());
  }

  plan.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t p = 0; p < train_order.size(); ++p) {
    plan.folds[p % static_cast<std::size_t>(k)].validation.push_back(train_order[p]);
  }
  plan.train_subjects = train_order;
  std::sort(plan.train_subjects.begin(), plan.train_subjects.end());
  std::sort(plan.test_subjects.begin(), plan.test_subjects.end());
  for (auto& fold : plan.folds) {
    std::sort(fold.validation.begin(), fold.validation.end());
    std::set_difference(plan.train_subjects.begin(), plan.train_subjects.end(), fold.validation.begin(),
                        fold.validation.end(), std::back_inserter(fold.train));
  }
  audit_split(plan);
  return plan;
}

void audit_split(const SplitPlan& plan) {
  const std::set<std::string> train(plan.train_subjects.begin(), plan.train_subjects.end());
  for (const auto& s : plan.test_subjects) {
    if (train.count(s)) throw InvariantError("subject '" + s + "' is in both train and test");
  }
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto& fold = plan.folds[f];
    const std::set<std::string> fold_train(fold.train.begin(), fold.train.end());
    for (const auto& s : fold.validation) {
      if (fold_train.count(s)) throw InvariantError("subject '" + s + "' on both sides of fold " + std::to_string(f));
      if (!train.count(s)) throw InvariantError("fold validation subject '" + s + "' not in train set");
    }
    for (const auto& s : fold.train) {
      if (!train.count(s)) throw InvariantError("fold train subject '" + s + "' not in train set");
    }
  }
}

std::string split_to_json(const SplitPlan& plan) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["seed"] = plan.seed;
  j["train_fraction"] = plan.train_fraction;
  j["k"] = plan.k;
  j["train_subjects"] = plan.train_subjects;
  j["test_subjects"] = plan.test_subjects;
  auto folds = nlohmann::ordered_json::array();
  for (const auto& f : plan.folds) {
    folds.push_back({{"train", f.train}, {"validation", f.validation}});
  }
  j["folds"] = std::move(folds);
  return j.dump(2) + "\n";
}

SplitPlan split_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("split plan: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw DataError("split plan: unsupported version");
    SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.train_fraction = j.at("train_fraction").get<double>();
    plan.k = j.at("k").get<int>();
    plan.train_subjects = j.at("train_subjects").get<std::vector<std::string>>();
    plan.test_subjects = j.at("test_subjects").get<std::vector<std::string>>();
    for (const auto& f : j.at("folds")) {
      plan.folds.push_back({f.at("train").get<std::vector<std::string>>(),
                            f.at("validation").get<std::vector<std::string>>()});
    }
    audit_split(plan);
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("split plan: ") + e.what());
  }
}

}  // namespace periocular
