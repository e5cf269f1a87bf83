#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccdd/batch.hpp"

namespace ccdd {

enum class Tokenizer { kByte, kChar };

Tokenizer parse_tokenizer(const std::string& name);

/// Token id -> symbol. Byte mode has the 256 byte values; char mode has the
/// sorted set of code points observed in the corpus (UTF-8 encoded).
class Vocabulary {
 public:
  static Vocabulary bytes();
  static Vocabulary from_symbols(std::vector<std::string> symbols);

  Tokenizer kind() const { return kind_; }
  int size() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  std::vector<Token> encode(const std::string& text) const;
  std::string decode(std::span<const Token> ids) const;

  /// One symbol per line, with '\n', '\r' and '\\' escaped.
  std::string to_file_text() const;
  static Vocabulary from_file_text(const std::string& text);

 private:
  Vocabulary(Tokenizer kind, std::vector<std::string> symbols);

  Tokenizer kind_;
  std::vector<std::string> symbols_;
};

struct Corpus {
  Vocabulary vocab;
  std::vector<Token> tokens;
};

/// Splits UTF-8 text into code points (each returned as its byte string).
/// Throws InputError on malformed sequences.
std::vector<std::string> utf8_symbols(const std::string& text);

Corpus tokenize(const std::string& text, Tokenizer tokenizer);
Corpus load_corpus_file(const std::string& path, Tokenizer tokenizer);

/// Contiguous length-L windows, remainder dropped.
TokenBatch pack_windows(std::span<const Token> tokens, int length);

/// Deterministic permutation of the windows.
TokenBatch shuffle_windows(const TokenBatch& windows, std::uint64_t seed);

/// Training batch for `step`: global rows step*B .. step*B+B-1 walk through
/// one fresh permutation of the windows per epoch.
TokenBatch select_batch(const TokenBatch& windows, std::int64_t step, int batch_size,
                        std::uint64_t seed);

/// Splits off the last `fraction` of the windows (at least one when the
/// fraction is positive). Returns {train, holdout}.
std::pair<TokenBatch, TokenBatch> split_holdout(const TokenBatch& windows, double fraction);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace ccdd
