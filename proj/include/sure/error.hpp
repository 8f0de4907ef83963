#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sure {

/// Base of every error raised by the toolkit. `kind()` is a stable
/// machine-readable tag; the CLI maps kinds to exit codes.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

// corpus_model
class ParseError : public Error {
public:
  ParseError(std::string file, std::size_t line_no, const std::string& why)
      : Error("ParseError", file + ":" + std::to_string(line_no) + ": " + why),
        file_(std::move(file)), line_no_(line_no) {}
  std::size_t line_no() const noexcept { return line_no_; }
  const std::string& file() const noexcept { return file_; }

private:
  std::string file_;
  std::size_t line_no_;
};

class DuplicateId : public Error {
public:
  explicit DuplicateId(std::string id)
      : Error("DuplicateId", "duplicate id: " + id), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

private:
  std::string id_;
};

class EmptyAnswers : public Error {
public:
  explicit EmptyAnswers(std::string id)
      : Error("EmptyAnswers", "query has no answers: " + id), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

private:
  std::string id_;
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& why) : Error("ValidationError", why) {}
};

// retrieval
class DimensionMismatch : public Error {
public:
  DimensionMismatch(std::size_t a, std::size_t b)
      : Error("DimensionMismatch", "dimension mismatch: " + std::to_string(a) +
                                       " vs " + std::to_string(b)) {}
};

class KTooLarge : public Error {
public:
  KTooLarge(std::size_t k, std::size_t n)
      : Error("KTooLarge", "k=" + std::to_string(k) + " exceeds store size " +
                               std::to_string(n)) {}
};

// perturbation_engine
class RankParseError : public Error {
public:
  enum class Reason { WrongCount, OutOfRange, Duplicate };
  RankParseError(Reason reason, const std::string& detail)
      : Error("RankParseError", detail), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

private:
  Reason reason_;
};

class ExtractError : public Error {
public:
  explicit ExtractError(const std::string& why) : Error("ExtractError", why) {}
};

class EmptyCompletion : public Error {
public:
  EmptyCompletion() : Error("EmptyCompletion", "model returned an empty completion") {}
};

// llm_gateway
class GatewayError : public Error {
public:
  enum class Kind { Transport, Http, Timeout, Exhausted };
  GatewayError(Kind kind, int status, const std::string& detail)
      : Error("GatewayError", detail), gateway_kind_(kind), status_(status) {}
  Kind gateway_kind() const noexcept { return gateway_kind_; }
  int status() const noexcept { return status_; }

private:
  Kind gateway_kind_;
  int status_;
};

class UnsupportedByEndpoint : public Error {
public:
  explicit UnsupportedByEndpoint(const std::string& why)
      : Error("UnsupportedByEndpoint", why) {}
};

class ProtocolError : public Error {
public:
  explicit ProtocolError(const std::string& why) : Error("ProtocolError", why) {}
};

// preservation_filter / robustness_eval
class NliParseFailure : public Error {
public:
  explicit NliParseFailure(const std::string& completion)
      : Error("NliParseFailure", "no NLI label in completion: " + completion) {}
};

class JudgeParseError : public Error {
public:
  explicit JudgeParseError(const std::string& completion)
      : Error("JudgeParseError", "no verdict in judge completion: " + completion) {}
};

class ReferenceError : public Error {
public:
  explicit ReferenceError(const std::string& what)
      : Error("ReferenceError", "unresolved reference: " + what) {}
};

class EmptyCell : public Error {
public:
  EmptyCell() : Error("EmptyCell", "cannot compute metrics over an empty cell") {}
};

// oracle_stats
class TooFewCandidates : public Error {
public:
  explicit TooFewCandidates(std::size_t n)
      : Error("TooFewCandidates", "need at least 2 candidates, got " + std::to_string(n)) {}
};

class MissingAnnotation : public Error {
public:
  explicit MissingAnnotation(const std::string& doc_id)
      : Error("MissingAnnotation", "no dtd annotation for doc " + doc_id) {}
};

class EmptySample : public Error {
public:
  EmptySample() : Error("EmptySample", "K-S test needs two non-empty samples") {}
};

// benchmark_training
class MissingPassage : public Error {
public:
  explicit MissingPassage(const std::string& pair_id)
      : Error("MissingPassage", "missing passage for pair " + pair_id) {}
};

class AnswerAbsent : public Error {
public:
  explicit AnswerAbsent(const std::string& pair_id)
      : Error("AnswerAbsent", "answer not contained in passage for pair " + pair_id) {}
};

class DegeneratePreference : public Error {
public:
  explicit DegeneratePreference(const std::string& pair_id)
      : Error("DegeneratePreference", "chosen equals rejected for pair " + pair_id) {}
};

// cli_orchestrator
class MissingDependency : public Error {
public:
  explicit MissingDependency(std::string stage)
      : Error("MissingDependency", "stage not completed: " + stage),
        stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& why) : Error("ConfigError", why) {}
};

}  // namespace sure
