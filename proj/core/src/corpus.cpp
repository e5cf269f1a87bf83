#include "ccdd/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ccdd/error.hpp"
#include "ccdd/rng.hpp"

namespace ccdd {

Tokenizer parse_tokenizer(const std::string& name) {
  if (name == "byte") return Tokenizer::kByte;
  if (name == "char") return Tokenizer::kChar;
  throw ConfigError("tokenizer: unknown kind '" + name + "'");
}

Vocabulary::Vocabulary(Tokenizer kind, std::vector<std::string> symbols)
    : kind_(kind), symbols_(std::move(symbols)) {}

Vocabulary Vocabulary::bytes() {
  std::vector<std::string> s;
  for (int b = 0; b < 256; ++b) s.emplace_back(1, static_cast<char>(b));
  return Vocabulary(Tokenizer::kByte, std::move(s));
}

Vocabulary Vocabulary::from_symbols(std::vector<std::string> symbols) {
  if (symbols.empty()) throw InputError("vocabulary: no symbols");
  std::set<std::string> unique(symbols.begin(), symbols.end());
  if (unique.size() != symbols.size()) throw InputError("vocabulary: duplicate symbols");
  return Vocabulary(Tokenizer::kChar, std::move(symbols));
}

std::vector<Token> Vocabulary::encode(const std::string& text) const {
  std::vector<Token> ids;
  if (kind_ == Tokenizer::kByte) {
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<Token>(c));
    return ids;
  }
  std::map<std::string, Token> index;
  for (std::size_t i = 0; i < symbols_.size(); ++i) index.emplace(symbols_[i], static_cast<Token>(i));
  for (const std::string& sym : utf8_symbols(text)) {
    const auto it = index.find(sym);
    if (it == index.end()) throw InputError("vocabulary: symbol not in alphabet");
    ids.push_back(it->second);
  }
  return ids;
}

std::string Vocabulary::decode(std::span<const Token> ids) const {
  std::string out;
  for (Token id : ids) {
    if (id < 0 || id >= size()) throw InputError("vocabulary: token id out of range");
    out += symbols_[static_cast<std::size_t>(id)];
  }
  return out;
}

std::string Vocabulary::to_file_text() const {
  std::string out;
  for (const std::string& s : symbols_) {
    for (char c : s) {
      if (c == '\n') {
        out += "\\n";
      } else if (c == '\r') {
        out += "\\r";
      } else if (c == '\\') {
        out += "\\\\";
      } else {
        out += c;
      }
    }
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::from_file_text(const std::string& text) {
  std::vector<std::string> symbols;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      symbols.push_back(cur);
      cur.clear();
    } else if (c == '\\' && i + 1 < text.size()) {
      const char e = text[++i];
      cur += e == 'n' ? '\n' : e == 'r' ? '\r' : e;
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) symbols.push_back(cur);
  return from_symbols(std::move(symbols));
}

std::vector<std::string> utf8_symbols(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (lead < 0x80) {
      len = 1;
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      len = 2;
      cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
      len = 3;
      cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
      len = 4;
      cp = lead & 0x07;
    } else {
      throw InputError("undecodable UTF-8 byte at offset " + std::to_string(i));
    }
    if (i + len > text.size()) throw InputError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < len; ++k) {
      const auto c = static_cast<unsigned char>(text[i + k]);
      if ((c & 0xC0) != 0x80) {
        throw InputError("undecodable UTF-8 byte at offset " + std::to_string(i + k));
      }
      cp = (cp << 6) | (c & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                          (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw InputError("invalid UTF-8 code point at offset " + std::to_string(i));
    }
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Corpus tokenize(const std::string& text, Tokenizer tokenizer) {
  if (text.empty()) throw InputError("empty corpus");
  if (tokenizer == Tokenizer::kByte) {
    Vocabulary v = Vocabulary::bytes();
    std::vector<Token> ids = v.encode(text);
    return {std::move(v), std::move(ids)};
  }
  std::vector<std::string> symbols = utf8_symbols(text);
  std::vector<std::string> alphabet = symbols;
  std::sort(alphabet.begin(), alphabet.end());
  alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
  std::map<std::string, Token> index;
  for (std::size_t i = 0; i < alphabet.size(); ++i) index.emplace(alphabet[i], static_cast<Token>(i));
  std::vector<Token> ids;
  ids.reserve(symbols.size());
  for (const std::string& s : symbols) ids.push_back(index.at(s));
  return {Vocabulary::from_symbols(std::move(alphabet)), std::move(ids)};
}

Corpus load_corpus_file(const std::string& path, Tokenizer tokenizer) {
  return tokenize(read_file(path), tokenizer);
}

TokenBatch pack_windows(std::span<const Token> tokens, int length) {
  if (length < 1) throw ConfigError("sequence length must be positive");
  if (tokens.size() < static_cast<std::size_t>(length)) {
    throw InputError("corpus shorter than one window");
  }
  const auto count = static_cast<int>(tokens.size() / static_cast<std::size_t>(length));
  TokenBatch out(count, length);
  std::copy(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(out.size()),
            out.ids().begin());
  return out;
}

TokenBatch shuffle_windows(const TokenBatch& windows, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(windows.batch()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  RngStream rng = derive_stream(seed, StreamTag::kData, 0x5ff1e);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  TokenBatch out(windows.batch(), windows.length());
  for (int b = 0; b < windows.batch(); ++b) {
    const auto src = windows.row(order[static_cast<std::size_t>(b)]);
    std::copy(src.begin(), src.end(), out.row(b).begin());
  }
  return out;
}

namespace {

std::vector<int> epoch_permutation(int n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  RngStream rng = derive_stream(seed, StreamTag::kBatch, epoch);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace

TokenBatch select_batch(const TokenBatch& windows, std::int64_t step, int batch_size,
                        std::uint64_t seed) {
  if (windows.batch() < 1) throw InputError("no training windows");
  if (batch_size < 1 || step < 0) throw ConfigError("select_batch: bad step or batch size");
  const auto n = static_cast<std::uint64_t>(windows.batch());
  TokenBatch out(batch_size, windows.length());
  std::uint64_t cached_epoch = ~0ULL;
  std::vector<int> order;
  for (int i = 0; i < batch_size; ++i) {
    const std::uint64_t g = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(batch_size) +
                            static_cast<std::uint64_t>(i);
    const std::uint64_t epoch = g / n;
    if (epoch != cached_epoch) {
      order = epoch_permutation(windows.batch(), seed, epoch);
      cached_epoch = epoch;
    }
    const auto src = windows.row(order[static_cast<std::size_t>(g % n)]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::pair<TokenBatch, TokenBatch> split_holdout(const TokenBatch& windows, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("holdout_fraction: must lie in [0, 1)");
  const int n = windows.batch();
  int held = static_cast<int>(static_cast<double>(n) * fraction);
  if (fraction > 0.0 && held == 0) held = 1;
  if (n - held < 1) throw InputError("corpus too small to hold out evaluation windows");
  return {windows.slice(0, n - held), windows.slice(n - held, held)};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << contents;
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace ccdd
