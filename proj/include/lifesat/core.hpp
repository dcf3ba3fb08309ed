#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lifesat {

// Ordered life states; the underlying value is the rank (Death lowest).
enum class LifeState : int { Death = 0, E = 1, D = 2, C = 3, B = 4, A = 5 };

constexpr int rank(LifeState s) noexcept { return static_cast<int>(s); }
LifeState state_from_rank(int rank);

std::string_view to_string(LifeState s) noexcept;
LifeState parse_life_state(std::string_view text);

// A..E, highest rank first (the order vignettes are presented in).
inline constexpr std::array<LifeState, 5> kLivingStates = {
    LifeState::A, LifeState::B, LifeState::C, LifeState::D, LifeState::E};

inline constexpr std::array<LifeState, 6> kAllStatesAscending = {
    LifeState::Death, LifeState::E, LifeState::D,
    LifeState::C,     LifeState::B, LifeState::A};

enum class Context { Personal, Societal };
enum class Block { AdjacentPersonal, AdjacentSocietal, NonAdjacentPersonal };
enum class Basis { Letters, LifeSatisfactionScores };

std::string_view to_string(Context c) noexcept;
std::string_view to_string(Block b) noexcept;
std::string_view to_string(Basis b) noexcept;
Context parse_context(std::string_view text);
Block parse_block(std::string_view text);
Basis parse_basis(std::string_view text);

// The descending failure-probability ladder. Rungs are addressed by index;
// probabilities are only materialized for arithmetic, never compared.
namespace ladder {

inline constexpr std::size_t kRungs = 8;
inline constexpr std::array<long, kRungs> kDenominators = {
    2, 5, 10, 100, 1'000, 10'000, 100'000, 1'000'000};

constexpr double probability(std::size_t rung) {
  return 1.0 / static_cast<double>(kDenominators.at(rung));
}

// Next lower rung, or nullopt past the last one. Throws ContractViolation
// when `current` is not a rung index.
std::optional<std::size_t> next(std::size_t current);

// Maps a probability back to its rung (absolute tolerance 1e-12).
std::optional<std::size_t> rung_of(double probability);

}  // namespace ladder

struct GambleSpec {
  LifeState baseline = LifeState::C;
  LifeState win = LifeState::B;
  LifeState lose = LifeState::D;
  Context context = Context::Personal;
  Block block = Block::AdjacentPersonal;
  Basis basis = Basis::Letters;

  friend auto operator<=>(const GambleSpec&, const GambleSpec&) = default;
};

std::string describe(const GambleSpec& g);

struct ValidationResult {
  bool valid = true;
  std::string violation;

  explicit operator bool() const noexcept { return valid; }
};

ValidationResult validate_gamble(const GambleSpec& spec);

// The four chained triples (baseline E, D, C, B), in chain order.
std::array<GambleSpec, 4> adjacent_triples(Context context, Basis basis);

// Every rank-legal triple with one gap > 1 and both gaps <= 3.
std::vector<GambleSpec> non_adjacent_triples(Basis basis);

enum class BracketStatus { Resolved, Undecidable };

// Failure-probability bracket around a respondent's indifference point.
// Bounds are held as rung indices: an absent accepted rung means "rejected
// every rung" (probability 0), an absent rejected rung means "accepted the
// first rung" (probability 1).
struct IndifferenceBracket {
  BracketStatus status = BracketStatus::Undecidable;
  std::optional<std::size_t> accepted_rung;
  std::optional<std::size_t> rejected_rung;

  static IndifferenceBracket resolved(std::optional<std::size_t> accepted,
                                      std::optional<std::size_t> rejected);
  static IndifferenceBracket undecidable();
  // Builds a Resolved bracket from probabilities in {0} U ladder U {1}.
  static IndifferenceBracket from_probabilities(double highest_accepted,
                                                double lowest_rejected);

  bool is_resolved() const noexcept { return status == BracketStatus::Resolved; }
  double highest_accepted() const;
  double lowest_rejected() const;

  friend bool operator==(const IndifferenceBracket&,
                         const IndifferenceBracket&) = default;
};

struct VignetteRatings {
  std::map<LifeState, int> ratings;
  std::map<LifeState, std::string> explanations;

  bool complete() const;
  friend bool operator==(const VignetteRatings&, const VignetteRatings&) = default;
};

using StatePair = std::pair<LifeState, LifeState>;

// Adjacent pairs (lower, higher) whose lower-ranked state is rated strictly
// above the higher-ranked one. Throws IncompleteInput unless all five
// living states are rated.
std::vector<StatePair> ordering_violations(const VignetteRatings& ratings);

}  // namespace lifesat
