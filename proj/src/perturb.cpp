#include "sure/perturb.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "sure/error.hpp"
#include "sure/rng.hpp"
#include "sure/text.hpp"
#include "sure/util.hpp"

namespace sure {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Taxonomy

Category category_of(Variant v) {
  switch (v) {
    case Variant::Simple:
    case Variant::Complex: return Category::Style;
    case Variant::LlmGenerated:
    case Variant::SelfGenerated: return Category::Source;
    case Variant::Reverse:
    case Variant::Random:
    case Variant::LlmRanked: return Category::Logic;
    case Variant::Json:
    case Variant::Html:
    case Variant::Yaml:
    case Variant::Markdown: return Category::Format;
    default: return Category::Metadata;
  }
}

std::string_view category_name(Category c) {
  switch (c) {
    case Category::Style: return "Style";
    case Category::Source: return "Source";
    case Category::Logic: return "Logic";
    case Category::Format: return "Format";
    case Category::Metadata: return "Metadata";
  }
  return "";
}

std::string_view category_key(Category c) {
  switch (c) {
    case Category::Style: return "style";
    case Category::Source: return "source";
    case Category::Logic: return "logic";
    case Category::Format: return "format";
    case Category::Metadata: return "metadata";
  }
  return "";
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Simple: return "Simple";
    case Variant::Complex: return "Complex";
    case Variant::LlmGenerated: return "LLM-Generated";
    case Variant::SelfGenerated: return "Self-Generated";
    case Variant::Reverse: return "Reverse";
    case Variant::Random: return "Random";
    case Variant::LlmRanked: return "LLM-Ranked";
    case Variant::Json: return "JSON";
    case Variant::Html: return "HTML";
    case Variant::Yaml: return "YAML";
    case Variant::Markdown: return "Markdown";
    case Variant::TimestampPre: return "Timestamp (pre)";
    case Variant::TimestampPost: return "Timestamp (post)";
    case Variant::DatasourceWiki: return "Datasource (wiki)";
    case Variant::DatasourceTwitter: return "Datasource (twitter)";
  }
  return "";
}

std::string_view variant_key(Variant v) {
  switch (v) {
    case Variant::Simple: return "simple";
    case Variant::Complex: return "complex";
    case Variant::LlmGenerated: return "llm_generated";
    case Variant::SelfGenerated: return "self_generated";
    case Variant::Reverse: return "reverse";
    case Variant::Random: return "random";
    case Variant::LlmRanked: return "llm_ranked";
    case Variant::Json: return "json";
    case Variant::Html: return "html";
    case Variant::Yaml: return "yaml";
    case Variant::Markdown: return "markdown";
    case Variant::TimestampPre: return "timestamp_pre";
    case Variant::TimestampPost: return "timestamp_post";
    case Variant::DatasourceWiki: return "datasource_wiki";
    case Variant::DatasourceTwitter: return "datasource_twitter";
  }
  return "";
}

Category parse_category(std::string_view key) {
  if (key == "meta") return Category::Metadata;
  for (Category c : {Category::Style, Category::Source, Category::Logic, Category::Format,
                     Category::Metadata}) {
    if (category_key(c) == key || category_name(c) == key) return c;
  }
  throw ConfigError("unknown perturbation category: " + std::string(key));
}

Variant parse_variant(std::string_view key) {
  for (Variant v : kAllVariants) {
    if (variant_key(v) == key || variant_name(v) == key) return v;
  }
  throw ConfigError("unknown perturbation variant: " + std::string(key));
}

std::vector<Variant> variants_of(Category c) {
  std::vector<Variant> out;
  for (Variant v : kAllVariants) {
    if (category_of(v) == c) out.push_back(v);
  }
  return out;
}

PerturbationKind::PerturbationKind(Category category, Variant variant)
    : category_(category), variant_(variant) {
  if (category_of(variant) != category) {
    throw ValidationError(std::string(variant_name(variant)) + " is not a " +
                          std::string(category_name(category)) + " variant");
  }
}

std::string make_pair_id(std::string_view instance_id, Variant v) {
  return std::string(instance_id) + "|" + std::string(variant_key(v));
}

void PerturbedPair::validate() const {
  if (perturbed_text.empty()) throw ValidationError("empty perturbed text for " + pair_id);
  if (seed.has_value() != (kind.variant() == Variant::Random)) {
    throw ValidationError("seed must be present exactly for Random pairs: " + pair_id);
  }
}

json PerturbedPair::to_json() const {
  return json{{"pair_id", pair_id},
              {"instance_id", instance_id},
              {"category", category_key(kind.category())},
              {"variant", variant_key(kind.variant())},
              {"original_text", original_text},
              {"perturbed_text", perturbed_text},
              {"seed", seed ? json(*seed) : json(nullptr)},
              {"perturber_model", perturber_model ? json(*perturber_model) : json(nullptr)}};
}

PerturbedPair PerturbedPair::from_json(const json& j) {
  PerturbedPair p;
  try {
    p.pair_id = j.at("pair_id").get<std::string>();
    p.instance_id = j.at("instance_id").get<std::string>();
    p.kind = PerturbationKind(parse_category(j.at("category").get<std::string>()),
                              parse_variant(j.at("variant").get<std::string>()));
    p.original_text = j.at("original_text").get<std::string>();
    p.perturbed_text = j.at("perturbed_text").get<std::string>();
    if (j.contains("seed") && !j.at("seed").is_null()) p.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("perturber_model") && !j.at("perturber_model").is_null()) {
      p.perturber_model = j.at("perturber_model").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed pair record: ") + e.what());
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Dates and metadata config

Date parse_iso_date(std::string_view s) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
      std::sscanf(std::string(s).c_str(), "%4d-%2u-%2u", &y, &m, &d) != 3) {
    throw ConfigError("not an ISO-8601 date: " + std::string(s));
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw ConfigError("invalid calendar date: " + std::string(s));
  return Date{ymd};
}

std::string format_iso_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

void MetadataConfig::validate() const {
  if (pre_offset_days <= 0 || post_offset_days <= 0) {
    throw ConfigError("metadata offsets must be positive");
  }
  for (const auto* tpl : {&wiki_url_template, &twitter_url_template}) {
    if (tpl->find("{slug}") == std::string::npos) {
      throw ConfigError("URL template lacks {slug}: " + *tpl);
    }
  }
}

Date MetadataConfig::pre_timestamp() const {
  return knowledge_cutoff_date - std::chrono::days{pre_offset_days};
}

Date MetadataConfig::post_timestamp() const {
  return knowledge_cutoff_date + std::chrono::days{post_offset_days};
}

json MetadataConfig::to_json() const {
  return json{{"knowledge_cutoff_date", format_iso_date(knowledge_cutoff_date)},
              {"pre_offset_days", pre_offset_days},
              {"post_offset_days", post_offset_days},
              {"wiki_url_template", wiki_url_template},
              {"twitter_url_template", twitter_url_template}};
}

MetadataConfig MetadataConfig::from_json(const json& j) {
  MetadataConfig c;
  if (!j.is_object()) return c;
  if (j.contains("knowledge_cutoff_date")) {
    c.knowledge_cutoff_date = parse_iso_date(j.at("knowledge_cutoff_date").get<std::string>());
  }
  c.pre_offset_days = j.value("pre_offset_days", c.pre_offset_days);
  c.post_offset_days = j.value("post_offset_days", c.post_offset_days);
  c.wiki_url_template = j.value("wiki_url_template", c.wiki_url_template);
  c.twitter_url_template = j.value("twitter_url_template", c.twitter_url_template);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Sentence segmentation

namespace {

bool is_closing(char32_t cp) {
  return cp == U'"' || cp == U'\'' || cp == U')' || cp == U']' || cp == 0x201D || cp == 0x2019;
}

bool is_opening(char32_t cp) {
  return cp == U'"' || cp == U'\'' || cp == U'(' || cp == U'[' || cp == 0x201C || cp == 0x2018;
}

bool is_abbreviation(std::string_view word) {
  static constexpr std::string_view kAbbrev[] = {"e.g.", "i.e.", "mr.", "mrs.",
                                                 "dr.",  "st.",  "vs.", "etc."};
  auto cps = text::decode_utf8(word);
  std::size_t b = 0;
  while (b < cps.size() && is_opening(cps[b])) ++b;
  std::string core = text::fold_case(text::encode_utf8(
      std::vector<char32_t>(cps.begin() + static_cast<std::ptrdiff_t>(b), cps.end())));
  return std::find(std::begin(kAbbrev), std::end(kAbbrev), core) != std::end(kAbbrev);
}

bool ends_sentence(std::string_view word) {
  auto cps = text::decode_utf8(word);
  while (!cps.empty() && is_closing(cps.back())) cps.pop_back();
  if (cps.empty()) return false;
  const char32_t last = cps.back();
  return last == U'.' || last == U'!' || last == U'?';
}

bool starts_upper(std::string_view word) {
  for (char32_t cp : text::decode_utf8(word)) {
    if (is_opening(cp)) continue;
    return text::is_upper(cp);
  }
  return false;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view input) {
  const auto words = text::split_words(input);
  std::vector<std::string> sentences;
  std::string cur;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!cur.empty()) cur.push_back(' ');
    cur += words[i];
    const bool last = i + 1 == words.size();
    if (ends_sentence(words[i]) && !is_abbreviation(words[i]) &&
        (last || starts_upper(words[i + 1]))) {
      sentences.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) sentences.push_back(std::move(cur));
  return sentences;
}

// ---------------------------------------------------------------------------
// Logic perturbations

std::string build_rank_prompt(const std::vector<std::string>& sentences, std::string_view example) {
  const std::size_t n = sentences.size();
  std::string prompt =
      "Rearrange the following list of sentences in your preferred logical order and provide "
      "only the indices of the sentences. Please do not include any explanations.\n";
  prompt += "Example:";
  prompt += example;
  prompt += "\nSentences List:";
  prompt += json(sentences).dump(-1, ' ', false, json::error_handler_t::replace);
  prompt += "\nThe length of the Sentences List is " + std::to_string(n) +
            ". Therefore, the indices must contain " + std::to_string(n) +
            " elements, and the index values cannot exceed " + std::to_string(n - 1) + ".";
  return prompt;
}

std::vector<std::size_t> parse_rank_indices(std::string_view response, std::size_t n) {
  if (n == 0) throw ValidationError("rank list length must be positive");
  std::vector<std::size_t> values;
  bool overflow = false;
  std::size_t i = 0;
  while (i < response.size()) {
    if (response[i] < '0' || response[i] > '9') {
      ++i;
      continue;
    }
    std::size_t v = 0;
    while (i < response.size() && response[i] >= '0' && response[i] <= '9') {
      if (v > n) {
        overflow = true;  // already out of range; keep consuming digits
      } else {
        v = v * 10 + static_cast<std::size_t>(response[i] - '0');
      }
      ++i;
    }
    values.push_back(overflow ? n : v);
    overflow = false;
  }
  if (values.size() != n) {
    throw RankParseError(RankParseError::Reason::WrongCount,
                         "expected " + std::to_string(n) + " indices, found " +
                             std::to_string(values.size()));
  }
  std::vector<bool> seen(n, false);
  for (std::size_t v : values) {
    if (v >= n) {
      throw RankParseError(RankParseError::Reason::OutOfRange,
                           "index " + std::to_string(v) + " exceeds " + std::to_string(n - 1));
    }
  }
  for (std::size_t v : values) {
    if (seen[v]) {
      throw RankParseError(RankParseError::Reason::Duplicate,
                           "index " + std::to_string(v) + " repeated");
    }
    seen[v] = true;
  }
  return values;
}

std::vector<std::size_t> rank_with_llm(const std::vector<std::string>& sentences,
                                       LlmGateway& gateway, std::string_view example,
                                       int max_retries) {
  const std::string prompt = build_rank_prompt(sentences, example);
  const ModelRef model = gateway.model(Role::Perturber);
  for (int attempt = 0;; ++attempt) {
    const std::string reply = gateway.chat(model, prompt, attempt);
    try {
      return parse_rank_indices(reply, sentences.size());
    } catch (const RankParseError&) {
      if (attempt >= max_retries) throw;
    }
  }
}

LogicResult logic_perturb(Variant variant, const std::vector<std::string>& sentences,
                          const LogicOptions& opts) {
  if (sentences.empty()) throw ValidationError("logic perturbation needs at least one sentence");
  LogicResult out;
  switch (variant) {
    case Variant::Reverse:
      out.sentences.assign(sentences.rbegin(), sentences.rend());
      break;
    case Variant::Random: {
      if (!opts.seed) throw ValidationError("Random ordering requires a seed");
      out.sentences = sentences;
      SplitMix64 rng(*opts.seed);
      fisher_yates(out.sentences, rng);
      break;
    }
    case Variant::LlmRanked: {
      if (!opts.gateway) throw ValidationError("LLM-Ranked ordering requires a gateway");
      try {
        const auto order = rank_with_llm(sentences, *opts.gateway, opts.example, opts.max_retries);
        for (std::size_t idx : order) out.sentences.push_back(sentences[idx]);
      } catch (const RankParseError& e) {
        warn(std::string("LLM ranking unusable after retries, keeping original order: ") +
             e.what());
        out.sentences = sentences;
        out.fell_back = true;
      }
      break;
    }
    default:
      throw ValidationError(std::string(variant_name(variant)) + " is not a logic variant");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Escaping helpers

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string html_unescape(std::string_view s) {
  static constexpr std::pair<std::string_view, char> kEntities[] = {
      {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&#39;", '\''}};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    bool matched = false;
    if (s[i] == '&') {
      for (const auto& [ent, ch] : kEntities) {
        if (s.substr(i, ent.size()) == ent) {
          out.push_back(ch);
          i += ent.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) out.push_back(s[i++]);
  }
  return out;
}

namespace {

std::string attr_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '\'': out += "&#39;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

// YAML double-quoted scalars are used whenever a plain scalar could be
// misread or would not survive a line-based split.
bool yaml_needs_quotes(std::string_view s) {
  if (s.empty()) return true;
  static constexpr std::string_view kIndicators = "-?[]{},&*!|>%@`";
  if (kIndicators.find(s.front()) != std::string_view::npos) return true;
  if (s.front() == ' ' || s.back() == ' ') return true;
  static constexpr std::string_view kSpecial[] = {"~", "null", "true", "false", "yes",
                                                  "no", "on",  "off",  "y",     "n"};
  const std::string folded = text::fold_case(s);
  if (std::find(std::begin(kSpecial), std::end(kSpecial), folded) != std::end(kSpecial)) {
    return true;
  }
  for (char32_t cp : text::decode_utf8(s)) {
    if (cp == U':' || cp == U'#' || cp == U'"' || cp == U'\'' || cp == U'\\') return true;
    if (cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F)) return true;
    if (cp == 0x2028 || cp == 0x2029 || cp == 0xFEFF || cp == 0xFFFD) return true;
  }
  return false;
}

std::string yaml_scalar(std::string_view s) {
  if (!yaml_needs_quotes(s)) return std::string(s);
  std::string out = "\"";
  for (char32_t cp : text::decode_utf8(s)) {
    switch (cp) {
      case U'\\': out += "\\\\"; break;
      case U'"': out += "\\\""; break;
      case U'\n': out += "\\n"; break;
      case U'\r': out += "\\r"; break;
      case U'\t': out += "\\t"; break;
      default:
        if (cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F) || cp == 0x2028 ||
            cp == 0x2029 || cp == 0xFEFF) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04X", static_cast<unsigned>(cp));
          out += buf;
        } else {
          text::append_utf8(out, cp);
        }
    }
  }
  out += "\"";
  return out;
}

std::string yaml_unscalar(std::string_view s) {
  if (s.empty() || s.front() != '"') return std::string(s);
  if (s.size() < 2 || s.back() != '"') throw ExtractError("unterminated YAML string");
  const std::string_view body = s.substr(1, s.size() - 2);
  std::string out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '"') throw ExtractError("unescaped quote in YAML string");
    if (c != '\\') {
      out.push_back(c);
      continue;
    }
    if (++i >= body.size()) throw ExtractError("dangling escape in YAML string");
    switch (body[i]) {
      case '\\': out.push_back('\\'); break;
      case '"': out.push_back('"'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      case 't': out.push_back('\t'); break;
      case 'u': {
        if (i + 4 >= body.size()) throw ExtractError("short \\u escape in YAML string");
        const auto hex = std::string(body.substr(i + 1, 4));
        text::append_utf8(out, static_cast<char32_t>(std::stoul(hex, nullptr, 16)));
        i += 4;
        break;
      }
      default: throw ExtractError("unsupported YAML escape");
    }
  }
  return out;
}

std::string markdown_title(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string markdown_untitle(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 >= s.size()) {
      out.push_back(s[i]);
      continue;
    }
    const char n = s[++i];
    if (n == 'n') out.push_back('\n');
    else if (n == 'r') out.push_back('\r');
    else out.push_back(n);
  }
  return out;
}

constexpr std::string_view kHtmlHead =
    "<html lang=\"en\">\n<head>\n    <meta charset=\"UTF-8\">\n";
constexpr std::string_view kHtmlMid = "\n</head>\n<body> ";
constexpr std::string_view kHtmlTail = " </body>\n</html>";

std::string html_document(std::string_view meta_line, std::string_view title,
                          std::string_view text) {
  std::string out(kHtmlHead);
  out += meta_line;
  out += "    ";
  out += html_escape(title);
  out += kHtmlMid;
  out += html_escape(text);
  out += kHtmlTail;
  return out;
}

TitledText parse_html_document(std::string_view s, bool expect_meta) {
  if (!text::starts_with(s, kHtmlHead)) throw ExtractError("missing HTML head");
  s.remove_prefix(kHtmlHead.size());
  constexpr std::string_view kMeta = "    <meta name='";
  if (text::starts_with(s, kMeta)) {
    if (!expect_meta) throw ExtractError("unexpected meta tag in format render");
    const auto end = s.find(">\n");
    if (end == std::string_view::npos) throw ExtractError("unterminated meta tag");
    s.remove_prefix(end + 2);
  } else if (expect_meta) {
    throw ExtractError("missing meta tag");
  }
  if (!text::starts_with(s, "    ")) throw ExtractError("missing title line");
  s.remove_prefix(4);
  const auto mid = s.find(kHtmlMid);
  if (mid == std::string_view::npos) throw ExtractError("missing </head><body>");
  if (!text::ends_with(s, kHtmlTail)) throw ExtractError("missing </body></html>");
  const auto body_start = mid + kHtmlMid.size();
  if (body_start > s.size() - kHtmlTail.size()) throw ExtractError("truncated body");
  TitledText out;
  out.title = html_unescape(s.substr(0, mid));
  out.text = html_unescape(s.substr(body_start, s.size() - kHtmlTail.size() - body_start));
  return out;
}

}  // namespace

std::string wiki_slug(std::string_view title) {
  std::string out;
  for (char c : title) {
    const auto u = static_cast<unsigned char>(c);
    if (c == ' ') {
      out.push_back('_');
    } else if ((u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') ||
               c == '_' || c == '-') {
      out.push_back(c);
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", static_cast<unsigned>(u));
      out += buf;
    }
  }
  return out;
}

std::string render_format(Variant variant, std::string_view title, std::string_view text) {
  switch (variant) {
    case Variant::Json: {
      const auto dump = [](std::string_view s) {
        return json(std::string(s)).dump(-1, ' ', false, json::error_handler_t::replace);
      };
      return "{\n    \"title\": " + dump(title) + ",\n    \"text\": " + dump(text) + "\n}";
    }
    case Variant::Html:
      return html_document("", title, text);
    case Variant::Yaml:
      return "Title: " + yaml_scalar(title) + "\nText: " + yaml_scalar(text);
    case Variant::Markdown:
      return "# " + markdown_title(title) + "\n" + std::string(text);
    default:
      throw ValidationError(std::string(variant_name(variant)) + " is not a format variant");
  }
}

std::string metadata_content(Variant variant, std::string_view title, const MetadataConfig& cfg) {
  switch (variant) {
    case Variant::TimestampPre: return format_iso_date(cfg.pre_timestamp());
    case Variant::TimestampPost: return format_iso_date(cfg.post_timestamp());
    case Variant::DatasourceWiki: return replace_all(cfg.wiki_url_template, "{slug}", wiki_slug(title));
    case Variant::DatasourceTwitter:
      return replace_all(cfg.twitter_url_template, "{slug}", wiki_slug(title));
    default:
      throw ValidationError(std::string(variant_name(variant)) + " is not a metadata variant");
  }
}

std::string render_metadata(Variant variant, std::string_view title, std::string_view text,
                            const MetadataConfig& cfg) {
  cfg.validate();
  const bool timestamp = variant == Variant::TimestampPre || variant == Variant::TimestampPost;
  const std::string meta = std::string("    <meta name='") + (timestamp ? "timestamp" : "datasource") +
                           "' content='" + attr_escape(metadata_content(variant, title, cfg)) +
                           "'>\n";
  return html_document(meta, title, text);
}

TitledText extract_plain_text(Variant variant, std::string_view rendered) {
  switch (variant) {
    case Variant::Json: {
      auto j = json::parse(rendered, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("title") || !j.contains("text") ||
          !j.at("title").is_string() || !j.at("text").is_string()) {
        throw ExtractError("not a title/text JSON object");
      }
      return {j.at("title").get<std::string>(), j.at("text").get<std::string>()};
    }
    case Variant::Html:
      return parse_html_document(rendered, false);
    case Variant::Yaml: {
      if (!text::starts_with(rendered, "Title: ")) throw ExtractError("missing 'Title:' key");
      const auto nl = rendered.find('\n');
      if (nl == std::string_view::npos) throw ExtractError("missing 'Text:' line");
      const auto rest = rendered.substr(nl + 1);
      if (!text::starts_with(rest, "Text: ")) throw ExtractError("missing 'Text:' key");
      const auto text_value = rest.substr(6);
      if (text_value.find('\n') != std::string_view::npos) {
        throw ExtractError("unexpected extra YAML lines");
      }
      return {yaml_unscalar(rendered.substr(7, nl - 7)), yaml_unscalar(text_value)};
    }
    case Variant::Markdown: {
      if (!text::starts_with(rendered, "# ")) throw ExtractError("missing markdown heading");
      const auto nl = rendered.find('\n');
      if (nl == std::string_view::npos) throw ExtractError("missing markdown body");
      return {markdown_untitle(rendered.substr(2, nl - 2)), std::string(rendered.substr(nl + 1))};
    }
    case Variant::TimestampPre:
    case Variant::TimestampPost:
    case Variant::DatasourceWiki:
    case Variant::DatasourceTwitter:
      return parse_html_document(rendered, true);
    default:
      throw ExtractError(std::string(variant_name(variant)) + " renders plain text");
  }
}

// ---------------------------------------------------------------------------
// Model-based rewrites

std::string llm_rewrite_prompt(Variant variant, std::string_view document) {
  std::string prompt;
  switch (variant) {
    case Variant::Simple:
      prompt =
          "Please simplify the following text while preserving its original meaning. Use "
          "shorter sentences, basic vocabulary, and clear language. Avoid complex structures, "
          "technical terms, or ambiguous expressions.\n\nHere is the passage to simplify:";
      break;
    case Variant::Complex:
      prompt =
          "Please complexify the following text while preserving its original meaning. Use "
          "longer sentences, intricate sentence structures, and advanced vocabulary. Avoid "
          "contractions, informal language, and colloquial expressions, ensuring the text "
          "maintains a professional and authoritative tone throughout.\n\nHere is the passage "
          "to complexify:";
      break;
    case Variant::LlmGenerated:
    case Variant::SelfGenerated:
      prompt =
          "Please rewrite the following passage. Ensure that the overall meaning, tone, and "
          "important details remain intact. Avoid any significant shifts in style or focus. The "
          "aim is to create a fresh version while faithfully conveying the original "
          "content.\n\nHere is the passage to paraphrase:";
      break;
    default:
      throw ValidationError(std::string(variant_name(variant)) + " is not a model-based variant");
  }
  prompt += document;
  return prompt;
}

std::string perturb_llm(Variant variant, const std::string& text, const std::string& model,
                        LlmGateway& gateway, std::optional<GenConfig> gen) {
  const std::string prompt = llm_rewrite_prompt(variant, text);
  Role role = Role::Perturber;
  if (variant == Variant::SelfGenerated) {
    if (model != gateway.model(Role::Reader).name) {
      throw ConfigError("self-generated rewrites must use the reader model (" +
                        gateway.model(Role::Reader).name + "), got " + model);
    }
    role = Role::Reader;
  }
  const std::string reply =
      text::trim(gateway.chat(ModelRef{model, role}, prompt, gen.value_or(gateway.gen())));
  if (reply.empty()) throw EmptyCompletion();
  return reply;
}

}  // namespace sure
