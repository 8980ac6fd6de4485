#include "xml_reader.hpp"

#include <cctype>
#include <cstdint>

#include "pens/error.hpp"

namespace pens::xml {
namespace {

bool is_name_start(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalpha(u) || c == '_' || c == ':' || u >= 0x80;
}

bool is_name_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return is_name_start(c) || std::isdigit(u) || c == '-' || c == '.';
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class Parser {
 public:
  Parser(std::string_view in, Handler& handler) : in_(in), handler_(handler) {
    if (in_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
  }

  void run() {
    while (pos_ < in_.size()) {
      if (in_[pos_] == '<') {
        markup();
      } else {
        char_data();
      }
    }
    if (!open_.empty()) {
      fail("unexpected end of input inside <" + open_.back().first + ">",
           open_.back().second);
    }
  }

 private:
  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw ParseError("xml: " + what, at);
  }

  bool starts_with(std::string_view s) const { return in_.substr(pos_, s.size()) == s; }

  std::size_t find_or_fail(std::string_view terminator, std::size_t from,
                           const char* construct) const {
    const auto end = in_.find(terminator, pos_);
    if (end == std::string_view::npos) fail(std::string("unterminated ") + construct, from);
    return end;
  }

  void markup() {
    const std::size_t start = pos_;
    if (starts_with("<!--")) {
      pos_ = find_or_fail("-->", start, "comment") + 3;
    } else if (starts_with("<![CDATA[")) {
      if (open_.empty()) fail("CDATA outside of an element", start);
      pos_ += 9;
      const auto end = find_or_fail("]]>", start, "CDATA section");
      handler_.text(in_.substr(pos_, end - pos_), start);
      pos_ = end + 3;
    } else if (starts_with("<?")) {
      pos_ = find_or_fail("?>", start, "processing instruction") + 2;
    } else if (starts_with("<!DOCTYPE")) {
      if (in_.find('[', pos_) < in_.find('>', pos_)) {
        fail("DOCTYPE internal subsets are not supported", start);
      }
      pos_ = find_or_fail(">", start, "DOCTYPE") + 1;
    } else if (starts_with("</")) {
      end_tag(start);
    } else {
      start_tag(start);
    }
  }

  std::string name(std::size_t at) {
    if (pos_ >= in_.size() || !is_name_start(in_[pos_])) fail("expected a name", pos_ < in_.size() ? pos_ : at);
    const std::size_t begin = pos_;
    while (pos_ < in_.size() && is_name_char(in_[pos_])) ++pos_;
    return std::string(in_.substr(begin, pos_ - begin));
  }

  void skip_space() {
    while (pos_ < in_.size() && is_space(in_[pos_])) ++pos_;
  }

  void start_tag(std::size_t start) {
    ++pos_;
    std::string tag = name(start);
    Attributes attrs;
    for (;;) {
      const std::size_t before = pos_;
      skip_space();
      if (pos_ >= in_.size()) fail("unterminated start tag <" + tag + ">", start);
      if (in_[pos_] == '>') {
        ++pos_;
        handler_.start_element(tag, attrs, start);
        open_.emplace_back(std::move(tag), start);
        return;
      }
      if (starts_with("/>")) {
        pos_ += 2;
        handler_.start_element(tag, attrs, start);
        handler_.end_element(tag, start);
        return;
      }
      if (before == pos_) fail("expected whitespace between attributes", pos_);
      std::string key = name(start);
      skip_space();
      if (pos_ >= in_.size() || in_[pos_] != '=') fail("expected '=' after attribute " + key, pos_);
      ++pos_;
      skip_space();
      if (pos_ >= in_.size() || (in_[pos_] != '"' && in_[pos_] != '\'')) {
        fail("expected quoted value for attribute " + key, pos_);
      }
      const char quote = in_[pos_++];
      const std::size_t value_start = pos_;
      const auto end = in_.find(quote, pos_);
      if (end == std::string_view::npos) fail("unterminated attribute value", value_start - 1);
      attrs.emplace_back(std::move(key), decode(in_.substr(value_start, end - value_start), value_start));
      pos_ = end + 1;
    }
  }

  void end_tag(std::size_t start) {
    pos_ += 2;
    const std::string tag = name(start);
    skip_space();
    if (pos_ >= in_.size() || in_[pos_] != '>') fail("unterminated end tag </" + tag + ">", start);
    ++pos_;
    if (open_.empty()) fail("end tag </" + tag + "> without matching start tag", start);
    if (open_.back().first != tag) {
      fail("end tag </" + tag + "> does not match <" + open_.back().first + ">", start);
    }
    open_.pop_back();
    handler_.end_element(tag, start);
  }

  void char_data() {
    const std::size_t start = pos_;
    auto end = in_.find('<', pos_);
    if (end == std::string_view::npos) end = in_.size();
    const auto raw = in_.substr(start, end - start);
    pos_ = end;
    if (open_.empty()) {
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!is_space(raw[i])) fail("text outside of any element", start + i);
      }
      return;
    }
    handler_.text(decode(raw, start), start);
  }

  std::string decode(std::string_view raw, std::size_t base) const {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out.push_back(raw[i]);
        continue;
      }
      const auto semi = raw.find(';', i);
      if (semi == std::string_view::npos) fail("unterminated entity reference", base + i);
      const auto ref = raw.substr(i + 1, semi - i - 1);
      if (ref == "amp") out.push_back('&');
      else if (ref == "lt") out.push_back('<');
      else if (ref == "gt") out.push_back('>');
      else if (ref == "quot") out.push_back('"');
      else if (ref == "apos") out.push_back('\'');
      else if (ref.size() > 1 && ref[0] == '#') {
        std::uint32_t cp = 0;
        const bool hex = ref[1] == 'x' || ref[1] == 'X';
        const auto digits = ref.substr(hex ? 2 : 1);
        if (digits.empty()) fail("empty character reference", base + i);
        for (char c : digits) {
          const auto u = static_cast<unsigned char>(c);
          std::uint32_t d;
          if (std::isdigit(u)) d = static_cast<std::uint32_t>(c - '0');
          else if (hex && std::isxdigit(u)) d = static_cast<std::uint32_t>(std::tolower(u) - 'a' + 10);
          else fail("bad character reference &" + std::string(ref) + ";", base + i);
          cp = cp * (hex ? 16 : 10) + d;
          if (cp > 0x10FFFF) fail("character reference out of range", base + i);
        }
        append_utf8(out, cp);
      } else {
        fail("unknown entity &" + std::string(ref) + ";", base + i);
      }
      i = semi;
    }
    return out;
  }

  std::string_view in_;
  Handler& handler_;
  std::size_t pos_ = 0;
  std::vector<std::pair<std::string, std::size_t>> open_;
};

}  // namespace

void parse(std::string_view input, Handler& handler) {
  Parser(input, handler).run();
}

}  // namespace pens::xml
