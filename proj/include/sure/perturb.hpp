#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sure/gateway.hpp"

namespace sure {

enum class Category { Style, Source, Logic, Format, Metadata };

enum class Variant {
  Simple,
  Complex,
  LlmGenerated,
  SelfGenerated,
  Reverse,
  Random,
  LlmRanked,
  Json,
  Html,
  Yaml,
  Markdown,
  TimestampPre,
  TimestampPost,
  DatasourceWiki,
  DatasourceTwitter,
};

inline constexpr std::array<Variant, 15> kAllVariants = {
    Variant::Simple,       Variant::Complex,       Variant::LlmGenerated,
    Variant::SelfGenerated, Variant::Reverse,      Variant::Random,
    Variant::LlmRanked,    Variant::Json,          Variant::Html,
    Variant::Yaml,         Variant::Markdown,      Variant::TimestampPre,
    Variant::TimestampPost, Variant::DatasourceWiki, Variant::DatasourceTwitter,
};

Category category_of(Variant v);

/// Display names as used in report tables ("Style", "LLM-Generated", ...).
std::string_view category_name(Category c);
std::string_view variant_name(Variant v);
/// Stable machine keys ("style", "llm_generated", ...).
std::string_view category_key(Category c);
std::string_view variant_key(Variant v);
Category parse_category(std::string_view key);  // accepts "meta" for Metadata
Variant parse_variant(std::string_view key);
std::vector<Variant> variants_of(Category c);

/// A (category, variant) pair; construction rejects variants outside their
/// category.
class PerturbationKind {
public:
  PerturbationKind(Category category, Variant variant);
  explicit PerturbationKind(Variant variant) : PerturbationKind(category_of(variant), variant) {}

  Category category() const noexcept { return category_; }
  Variant variant() const noexcept { return variant_; }
  bool model_based() const noexcept {
    return category_ == Category::Style || category_ == Category::Source;
  }
  bool operator==(const PerturbationKind&) const = default;

private:
  Category category_;
  Variant variant_;
};

struct PerturbedPair {
  std::string pair_id;
  std::string instance_id;
  PerturbationKind kind{Variant::Reverse};
  std::string original_text;
  std::string perturbed_text;
  std::optional<std::uint64_t> seed;          // present iff variant is Random
  std::optional<std::string> perturber_model;

  /// Throws ValidationError when an invariant is broken.
  void validate() const;
  nlohmann::json to_json() const;
  static PerturbedPair from_json(const nlohmann::json& j);
};

std::string make_pair_id(std::string_view instance_id, Variant v);

using Date = std::chrono::sys_days;
Date parse_iso_date(std::string_view s);
std::string format_iso_date(Date d);

struct MetadataConfig {
  Date knowledge_cutoff_date = Date{std::chrono::year{2023} / 12 / 1};
  int pre_offset_days = 365;
  int post_offset_days = 365;
  std::string wiki_url_template = "https://en.wikipedia.org/wiki/{slug}";
  std::string twitter_url_template = "https://twitter.com/{slug}";

  void validate() const;
  Date pre_timestamp() const;
  Date post_timestamp() const;
  nlohmann::json to_json() const;
  static MetadataConfig from_json(const nlohmann::json& j);
};

// ---- logic ---------------------------------------------------------------

std::vector<std::string> split_sentences(std::string_view text);

inline constexpr std::string_view kDefaultRankExample =
    "Sentences List:[\"He was elected president in 1932.\", \"Franklin D. Roosevelt was an "
    "American politician.\", \"He led the country through the Great Depression.\"] "
    "Output:[1, 0, 2]";

std::string build_rank_prompt(const std::vector<std::string>& sentences,
                              std::string_view example = kDefaultRankExample);

/// All decimal integers in order; must be a permutation of 0..n-1.
std::vector<std::size_t> parse_rank_indices(std::string_view response, std::size_t n);

/// Queries the perturber model, re-asking up to `max_retries` times on a
/// malformed answer. Throws the last RankParseError when all attempts fail.
std::vector<std::size_t> rank_with_llm(const std::vector<std::string>& sentences,
                                       LlmGateway& gateway, std::string_view example,
                                       int max_retries);

struct LogicOptions {
  std::optional<std::uint64_t> seed;
  LlmGateway* gateway = nullptr;
  std::string example{kDefaultRankExample};
  int max_retries = 3;
};

struct LogicResult {
  std::vector<std::string> sentences;
  bool fell_back = false;  // LlmRanked kept the identity order
};

LogicResult logic_perturb(Variant variant, const std::vector<std::string>& sentences,
                          const LogicOptions& opts = {});

// ---- format / metadata ---------------------------------------------------

std::string html_escape(std::string_view s);
std::string html_unescape(std::string_view s);
std::string wiki_slug(std::string_view title);

std::string render_format(Variant variant, std::string_view title, std::string_view text);
std::string metadata_content(Variant variant, std::string_view title, const MetadataConfig& cfg);
std::string render_metadata(Variant variant, std::string_view title, std::string_view text,
                            const MetadataConfig& cfg);

struct TitledText {
  std::string title;
  std::string text;
  bool operator==(const TitledText&) const = default;
};

/// Inverse of render_format / render_metadata. Throws ExtractError.
TitledText extract_plain_text(Variant variant, std::string_view rendered);

// ---- model-based ---------------------------------------------------------

/// Rewrite prompt for Simple, Complex, LlmGenerated, SelfGenerated.
std::string llm_rewrite_prompt(Variant variant, std::string_view document);

/// Sends the rewrite prompt to `model` and returns the trimmed completion.
/// SelfGenerated requires `model` to be the gateway's reader model.
std::string perturb_llm(Variant variant, const std::string& text, const std::string& model,
                        LlmGateway& gateway, std::optional<GenConfig> gen = std::nullopt);

}  // namespace sure
