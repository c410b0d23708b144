#include "scrapeflow/html_parser.hpp"

#include <iconv.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdint>
#include <set>
#include <unordered_map>
#include <vector>

#include "scrapeflow/errors.hpp"
#include "scrapeflow/text.hpp"

namespace scrapeflow {

namespace {

// ---------------------------------------------------------------------------
// Encoding

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

// 0x80..0x9F of windows-1252; undefined slots map to the C1 control, as
// browsers do.
constexpr std::array<std::uint16_t, 32> kCp1252High = {
    0x20AC, 0x0081, 0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021,
    0x02C6, 0x2030, 0x0160, 0x2039, 0x0152, 0x008D, 0x017D, 0x008F,
    0x0090, 0x2018, 0x2019, 0x201C, 0x201D, 0x2022, 0x2013, 0x2014,
    0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0x009D, 0x017E, 0x0178};

std::string decode_cp1252(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size() + bytes.size() / 4);
  for (unsigned char b : bytes) {
    if (b < 0x80) {
      out.push_back(static_cast<char>(b));
    } else if (b < 0xA0) {
      append_utf8(out, kCp1252High[b - 0x80]);
    } else {
      append_utf8(out, b);
    }
  }
  return out;
}

std::string decode_with_iconv(std::string_view bytes, const std::string& charset) {
  iconv_t cd = iconv_open("UTF-8", charset.c_str());
  if (cd == reinterpret_cast<iconv_t>(-1)) {
    throw EncodingError("unsupported charset: " + charset);
  }
  std::string out(bytes.size() * 2 + 16, '\0');
  std::string in(bytes);
  char* in_ptr = in.data();
  std::size_t in_left = in.size();
  std::size_t produced = 0;
  while (in_left > 0) {
    char* out_ptr = out.data() + produced;
    std::size_t out_left = out.size() - produced;
    std::size_t rc = iconv(cd, &in_ptr, &in_left, &out_ptr, &out_left);
    produced = out.size() - out_left;
    if (rc == static_cast<std::size_t>(-1)) {
      if (errno == E2BIG) {
        out.resize(out.size() * 2);
        continue;
      }
      iconv_close(cd);
      throw EncodingError("body is not valid " + charset);
    }
  }
  iconv_close(cd);
  out.resize(produced);
  return out;
}

std::string canonical_charset(std::string_view label) {
  auto l = text::to_lower_ascii(text::trim(label));
  if (l == "utf8" || l == "unicode-1-1-utf-8") return "utf-8";
  // HTML treats these labels as windows-1252.
  if (l == "iso-8859-1" || l == "latin1" || l == "l1" || l == "ascii" ||
      l == "us-ascii" || l == "iso8859-1" || l == "cp1252" ||
      l == "x-cp1252" || l == "iso_8859-1") {
    return "windows-1252";
  }
  return l;
}

std::string decode_declared(std::string_view bytes, std::string_view label) {
  auto cs = canonical_charset(label);
  if (cs.empty()) throw EncodingError("empty charset label");
  if (cs == "utf-8") {
    if (bytes.substr(0, 3) == "\xEF\xBB\xBF") bytes.remove_prefix(3);
    if (!text::is_valid_utf8(bytes)) throw EncodingError("body is not valid utf-8");
    return std::string(bytes);
  }
  if (cs == "windows-1252") return decode_cp1252(bytes);
  return decode_with_iconv(bytes, cs);
}

// ---------------------------------------------------------------------------
// Character references

const std::unordered_map<std::string_view, std::uint32_t>& named_entities() {
  static const std::unordered_map<std::string_view, std::uint32_t> table = {
      {"amp", '&'},      {"lt", '<'},        {"gt", '>'},
      {"quot", '"'},     {"apos", '\''},     {"nbsp", 0xA0},
      {"iexcl", 0xA1},   {"cent", 0xA2},     {"pound", 0xA3},
      {"curren", 0xA4},  {"yen", 0xA5},      {"brvbar", 0xA6},
      {"sect", 0xA7},    {"uml", 0xA8},      {"copy", 0xA9},
      {"ordf", 0xAA},    {"laquo", 0xAB},    {"not", 0xAC},
      {"shy", 0xAD},     {"reg", 0xAE},      {"macr", 0xAF},
      {"deg", 0xB0},     {"plusmn", 0xB1},   {"sup2", 0xB2},
      {"sup3", 0xB3},    {"acute", 0xB4},    {"micro", 0xB5},
      {"para", 0xB6},    {"middot", 0xB7},   {"cedil", 0xB8},
      {"sup1", 0xB9},    {"ordm", 0xBA},     {"raquo", 0xBB},
      {"frac14", 0xBC},  {"frac12", 0xBD},   {"frac34", 0xBE},
      {"iquest", 0xBF},  {"Agrave", 0xC0},   {"Aacute", 0xC1},
      {"Acirc", 0xC2},   {"Atilde", 0xC3},   {"Auml", 0xC4},
      {"Aring", 0xC5},   {"AElig", 0xC6},    {"Ccedil", 0xC7},
      {"Egrave", 0xC8},  {"Eacute", 0xC9},   {"Ecirc", 0xCA},
      {"Euml", 0xCB},    {"Igrave", 0xCC},   {"Iacute", 0xCD},
      {"Icirc", 0xCE},   {"Iuml", 0xCF},     {"ETH", 0xD0},
      {"Ntilde", 0xD1},  {"Ograve", 0xD2},   {"Oacute", 0xD3},
      {"Ocirc", 0xD4},   {"Otilde", 0xD5},   {"Ouml", 0xD6},
      {"times", 0xD7},   {"Oslash", 0xD8},   {"Ugrave", 0xD9},
      {"Uacute", 0xDA},  {"Ucirc", 0xDB},    {"Uuml", 0xDC},
      {"Yacute", 0xDD},  {"THORN", 0xDE},    {"szlig", 0xDF},
      {"agrave", 0xE0},  {"aacute", 0xE1},   {"acirc", 0xE2},
      {"atilde", 0xE3},  {"auml", 0xE4},     {"aring", 0xE5},
      {"aelig", 0xE6},   {"ccedil", 0xE7},   {"egrave", 0xE8},
      {"eacute", 0xE9},  {"ecirc", 0xEA},    {"euml", 0xEB},
      {"igrave", 0xEC},  {"iacute", 0xED},   {"icirc", 0xEE},
      {"iuml", 0xEF},    {"eth", 0xF0},      {"ntilde", 0xF1},
      {"ograve", 0xF2},  {"oacute", 0xF3},   {"ocirc", 0xF4},
      {"otilde", 0xF5},  {"ouml", 0xF6},     {"divide", 0xF7},
      {"oslash", 0xF8},  {"ugrave", 0xF9},   {"uacute", 0xFA},
      {"ucirc", 0xFB},   {"uuml", 0xFC},     {"yacute", 0xFD},
      {"thorn", 0xFE},   {"yuml", 0xFF},     {"OElig", 0x152},
      {"oelig", 0x153},  {"Scaron", 0x160},  {"scaron", 0x161},
      {"Yuml", 0x178},   {"fnof", 0x192},    {"circ", 0x2C6},
      {"tilde", 0x2DC},  {"ensp", 0x2002},   {"emsp", 0x2003},
      {"thinsp", 0x2009}, {"zwnj", 0x200C},  {"zwj", 0x200D},
      {"ndash", 0x2013}, {"mdash", 0x2014},  {"lsquo", 0x2018},
      {"rsquo", 0x2019}, {"sbquo", 0x201A},  {"ldquo", 0x201C},
      {"rdquo", 0x201D}, {"bdquo", 0x201E},  {"dagger", 0x2020},
      {"Dagger", 0x2021}, {"bull", 0x2022},  {"hellip", 0x2026},
      {"permil", 0x2030}, {"prime", 0x2032}, {"Prime", 0x2033},
      {"lsaquo", 0x2039}, {"rsaquo", 0x203A}, {"euro", 0x20AC},
      {"trade", 0x2122}, {"larr", 0x2190},   {"uarr", 0x2191},
      {"rarr", 0x2192},  {"darr", 0x2193},   {"harr", 0x2194},
      {"minus", 0x2212}, {"le", 0x2264},     {"ge", 0x2265},
      {"ne", 0x2260},    {"infin", 0x221E},  {"hearts", 0x2665},
      {"check", 0x2713}, {"star", 0x2606},   {"starf", 0x2605},
  };
  return table;
}

// Legacy names that are recognized without a trailing semicolon.
const std::set<std::string_view> kLegacyNoSemicolon = {
    "amp", "lt", "gt", "quot", "nbsp", "copy", "reg"};

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return is_alpha(c) || is_digit(c); }
bool is_hex(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

std::uint32_t sanitize_code_point(std::uint64_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0xFFFD;
  if (cp >= 0x80 && cp <= 0x9F) return kCp1252High[cp - 0x80];
  return static_cast<std::uint32_t>(cp);
}

// Decodes one reference starting at in[i] == '&'. Returns the number of
// bytes consumed, 0 when the '&' is literal.
std::size_t decode_reference(std::string_view in, std::size_t i, bool in_attribute,
                             std::string& out) {
  std::size_t j = i + 1;
  if (j < in.size() && in[j] == '#') {
    ++j;
    bool hex = j < in.size() && (in[j] == 'x' || in[j] == 'X');
    if (hex) ++j;
    std::size_t start = j;
    std::uint64_t cp = 0;
    while (j < in.size() && (hex ? is_hex(in[j]) : is_digit(in[j]))) {
      if (cp <= 0x10FFFF) {
        char c = in[j];
        int d = is_digit(c) ? c - '0' : (c | 0x20) - 'a' + 10;
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint64_t>(d);
      }
      ++j;
    }
    if (j == start) return 0;
    if (j < in.size() && in[j] == ';') ++j;
    append_utf8(out, sanitize_code_point(cp));
    return j - i;
  }
  std::size_t start = j;
  while (j < in.size() && is_alnum(in[j]) && j - start < 32) ++j;
  if (j == start) return 0;
  auto name = in.substr(start, j - start);
  const auto& table = named_entities();
  if (j < in.size() && in[j] == ';') {
    if (auto it = table.find(name); it != table.end()) {
      append_utf8(out, it->second);
      return j + 1 - i;
    }
  }
  // Longest legacy prefix without semicolon, e.g. "&ampx" or "&copy 2024".
  for (std::size_t len = name.size(); len > 0; --len) {
    auto prefix = name.substr(0, len);
    if (!kLegacyNoSemicolon.count(prefix)) continue;
    std::size_t end = start + len;
    if (in_attribute && end < in.size() && (is_alnum(in[end]) || in[end] == '='))
      return 0;
    append_utf8(out, table.at(prefix));
    return end - i;
  }
  return 0;
}

std::string decode_refs(std::string_view raw, bool in_attribute) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size();) {
    if (raw[i] == '&') {
      if (auto used = decode_reference(raw, i, in_attribute, out)) {
        i += used;
        continue;
      }
    }
    out.push_back(raw[i++]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tokenizer

struct Token {
  enum class Type { StartTag, EndTag, Text };
  Type type;
  std::string name;  // lowercase tag name, or text content
  std::map<std::string, std::string> attrs;
  bool self_closing = false;
};

const std::set<std::string_view> kRawText = {"script", "style", "xmp", "iframe",
                                             "noembed", "noframes"};
const std::set<std::string_view> kEscapableRawText = {"title", "textarea"};

class Tokenizer {
 public:
  explicit Tokenizer(std::string_view in) : in_(in) {}

  template <class Sink>
  void run(Sink&& sink) {
    while (pos_ < in_.size()) {
      auto lt = in_.find('<', pos_);
      if (lt == std::string_view::npos) lt = in_.size();
      if (lt > pos_) emit_text(sink, in_.substr(pos_, lt - pos_));
      pos_ = lt;
      if (pos_ >= in_.size()) break;
      consume_markup(sink);
    }
  }

 private:
  template <class Sink>
  void emit_text(Sink& sink, std::string_view raw) {
    sink(Token{Token::Type::Text, decode_refs(raw, false), {}, false});
  }

  bool starts_with_ci(std::size_t at, std::string_view s) const {
    return at + s.size() <= in_.size() && text::iequals(in_.substr(at, s.size()), s);
  }

  void skip_until(std::string_view terminator) {
    auto end = in_.find(terminator, pos_);
    pos_ = end == std::string_view::npos ? in_.size() : end + terminator.size();
  }

  template <class Sink>
  void consume_markup(Sink& sink) {
    // in_[pos_] == '<'
    if (in_.substr(pos_, 4) == "<!--") {
      pos_ += 4;
      if (in_.substr(pos_, 1) == ">") {
        ++pos_;
      } else if (in_.substr(pos_, 2) == "->") {
        pos_ += 2;
      } else {
        skip_until("-->");
      }
      return;
    }
    if (in_.substr(pos_, 2) == "<!" || in_.substr(pos_, 2) == "<?") {
      skip_until(">");
      return;
    }
    if (in_.substr(pos_, 2) == "</") {
      std::size_t at = pos_ + 2;
      if (at < in_.size() && is_alpha(in_[at])) {
        pos_ = at;
        auto name = read_tag_name();
        skip_until(">");
        sink(Token{Token::Type::EndTag, std::move(name), {}, false});
      } else if (at < in_.size() && in_[at] == '>') {
        pos_ = at + 1;
      } else if (at >= in_.size()) {
        emit_text(sink, in_.substr(pos_));
        pos_ = in_.size();
      } else {
        skip_until(">");
      }
      return;
    }
    if (pos_ + 1 < in_.size() && is_alpha(in_[pos_ + 1])) {
      ++pos_;
      Token tok{Token::Type::StartTag, read_tag_name(), {}, false};
      read_attributes(tok);
      std::string name = tok.name;
      bool self_closing = tok.self_closing;
      sink(std::move(tok));
      if (!self_closing && kRawText.count(name)) {
        consume_raw(sink, name, false);
      } else if (!self_closing && kEscapableRawText.count(name)) {
        consume_raw(sink, name, true);
      } else if (!self_closing && name == "plaintext") {
        emit_text(sink, in_.substr(pos_));
        pos_ = in_.size();
      }
      return;
    }
    // A bare '<' is text.
    emit_text(sink, in_.substr(pos_, 1));
    ++pos_;
  }

  std::string read_tag_name() {
    std::size_t start = pos_;
    while (pos_ < in_.size() && !text::is_html_space(in_[pos_]) &&
           in_[pos_] != '/' && in_[pos_] != '>') {
      ++pos_;
    }
    return text::to_lower_ascii(in_.substr(start, pos_ - start));
  }

  void skip_spaces() {
    while (pos_ < in_.size() && text::is_html_space(in_[pos_])) ++pos_;
  }

  void read_attributes(Token& tok) {
    while (true) {
      skip_spaces();
      if (pos_ >= in_.size()) return;
      char c = in_[pos_];
      if (c == '>') {
        ++pos_;
        return;
      }
      if (c == '/') {
        ++pos_;
        if (pos_ < in_.size() && in_[pos_] == '>') {
          tok.self_closing = true;
          ++pos_;
          return;
        }
        continue;
      }
      std::size_t start = pos_++;
      while (pos_ < in_.size() && !text::is_html_space(in_[pos_]) &&
             in_[pos_] != '/' && in_[pos_] != '>' && in_[pos_] != '=') {
        ++pos_;
      }
      auto name = text::to_lower_ascii(in_.substr(start, pos_ - start));
      skip_spaces();
      std::string value;
      if (pos_ < in_.size() && in_[pos_] == '=') {
        ++pos_;
        skip_spaces();
        if (pos_ < in_.size() && (in_[pos_] == '"' || in_[pos_] == '\'')) {
          char quote = in_[pos_++];
          auto end = in_.find(quote, pos_);
          if (end == std::string_view::npos) end = in_.size();
          value = decode_refs(in_.substr(pos_, end - pos_), true);
          pos_ = std::min(end + 1, in_.size());
        } else {
          std::size_t vs = pos_;
          while (pos_ < in_.size() && !text::is_html_space(in_[pos_]) &&
                 in_[pos_] != '>') {
            ++pos_;
          }
          value = decode_refs(in_.substr(vs, pos_ - vs), true);
        }
      }
      tok.attrs.emplace(std::move(name), std::move(value));  // first wins
    }
  }

  template <class Sink>
  void consume_raw(Sink& sink, const std::string& name, bool escapable) {
    std::size_t search = pos_;
    std::size_t end = in_.size();
    while (search < in_.size()) {
      auto lt = in_.find("</", search);
      if (lt == std::string_view::npos) break;
      std::size_t after = lt + 2 + name.size();
      if (starts_with_ci(lt + 2, name) &&
          (after >= in_.size() || text::is_html_space(in_[after]) ||
           in_[after] == '/' || in_[after] == '>')) {
        end = lt;
        break;
      }
      search = lt + 2;
    }
    auto content = in_.substr(pos_, end - pos_);
    if (!content.empty()) {
      sink(Token{Token::Type::Text,
                 escapable ? decode_refs(content, false) : std::string(content),
                 {},
                 false});
    }
    pos_ = end;
    if (pos_ < in_.size()) {
      pos_ += 2 + name.size();
      skip_until(">");
      sink(Token{Token::Type::EndTag, name, {}, false});
    }
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Tree construction

const std::set<std::string_view> kVoid = {
    "area", "base", "br",    "col",   "embed",  "hr",    "img",
    "input", "link", "meta", "param", "source", "track", "wbr",
    "basefont", "bgsound", "frame", "keygen"};

const std::set<std::string_view> kClosesP = {
    "address", "article", "aside",  "blockquote", "center",  "details",
    "dialog",  "dir",     "div",    "dl",         "fieldset", "figcaption",
    "figure",  "footer",  "header", "hgroup",     "main",    "menu",
    "nav",     "ol",      "p",      "search",     "section", "summary",
    "ul",      "h1",      "h2",     "h3",         "h4",      "h5",
    "h6",      "pre",     "listing", "form",      "li",      "dd",
    "dt",      "plaintext", "table", "hr",        "xmp"};

const std::set<std::string_view> kHeadings = {"h1", "h2", "h3", "h4", "h5", "h6"};

const std::set<std::string_view> kImpliedEnd = {
    "dd", "dt", "li", "optgroup", "option", "p", "rb", "rp", "rt", "rtc"};

const std::set<std::string_view> kScopeBarrier = {
    "applet", "caption", "html", "table", "td", "th", "marquee", "object",
    "template"};

const std::set<std::string_view> kFormatting = {
    "a", "b", "big", "code", "em", "font", "i", "nobr", "s", "small", "strike",
    "strong", "tt", "u"};

const std::set<std::string_view> kSpecial = {
    "address", "applet", "area", "article", "aside", "base", "basefont",
    "bgsound", "blockquote", "body", "br", "button", "caption", "center",
    "col", "colgroup", "dd", "details", "dir", "div", "dl", "dt", "embed",
    "fieldset", "figcaption", "figure", "footer", "form", "frame", "frameset",
    "h1", "h2", "h3", "h4", "h5", "h6", "head", "header", "hgroup", "hr",
    "html", "iframe", "img", "input", "keygen", "li", "link", "listing",
    "main", "marquee", "menu", "meta", "nav", "noembed", "noframes",
    "noscript", "object", "ol", "p", "param", "plaintext", "pre", "script",
    "search", "section", "select", "source", "style", "summary", "table",
    "tbody", "td", "template", "textarea", "tfoot", "th", "thead", "title",
    "tr", "track", "ul", "wbr", "xmp"};

const std::set<std::string_view> kNoText = {"script", "style", "template"};

class TreeBuilder {
 public:
  TreeBuilder() { open_.push_back(builder_.add_root("html")); }

  void operator()(Token tok) {
    if (inert_depth_ > 0) {
      skip_inert(tok);
      return;
    }
    switch (tok.type) {
      case Token::Type::Text:
        on_text(tok.name);
        break;
      case Token::Type::StartTag:
        on_start(std::move(tok));
        break;
      case Token::Type::EndTag:
        on_end(tok.name);
        break;
    }
  }

  bool saw_element() const noexcept { return saw_element_; }

  DomGraph finish() && { return std::move(builder_).build(); }

 private:
  const std::string& tag_of(NodeId id) const { return builder_.node(id).tag; }
  NodeId current() const { return open_.back(); }
  const std::string& current_tag() const { return tag_of(current()); }

  bool in_foreign() const {
    return std::any_of(open_.begin(), open_.end(), [this](NodeId id) {
      return tag_of(id) == "svg" || tag_of(id) == "math";
    });
  }

  // Index in open_ of the topmost element named `tag` inside the scope
  // bounded by the barrier set plus `extra`, or -1.
  long find_in_scope(std::string_view tag,
                     std::initializer_list<std::string_view> extra = {}) const {
    for (long i = static_cast<long>(open_.size()) - 1; i >= 0; --i) {
      const auto& t = tag_of(open_[static_cast<std::size_t>(i)]);
      if (t == tag) return i;
      if (kScopeBarrier.count(t)) return -1;
      if (std::find(extra.begin(), extra.end(), t) != extra.end()) return -1;
    }
    return -1;
  }

  long find_open(std::string_view tag) const {
    for (long i = static_cast<long>(open_.size()) - 1; i > 0; --i) {
      if (tag_of(open_[static_cast<std::size_t>(i)]) == tag) return i;
    }
    return -1;
  }

  void pop_to(long index) {
    // never pops the root
    open_.resize(static_cast<std::size_t>(std::max(index, 1L)));
  }

  void generate_implied_end(std::string_view except = {}) {
    while (open_.size() > 1 && kImpliedEnd.count(current_tag()) &&
           current_tag() != except) {
      open_.pop_back();
    }
  }

  void close_p_in_button_scope() {
    long i = find_in_scope("p", {"button"});
    if (i < 0) return;
    generate_implied_end("p");
    pop_to(find_open("p"));
  }

  // Closes the nearest open `names` element, searching down to the first
  // element in `barriers`.
  void close_nearest(std::initializer_list<std::string_view> names,
                     std::initializer_list<std::string_view> barriers) {
    for (long i = static_cast<long>(open_.size()) - 1; i > 0; --i) {
      const auto& t = tag_of(open_[static_cast<std::size_t>(i)]);
      if (std::find(names.begin(), names.end(), t) != names.end()) {
        pop_to(i);
        return;
      }
      if (std::find(barriers.begin(), barriers.end(), t) != barriers.end()) return;
    }
  }

  // Template contents are inert: nothing inside <template> joins the tree.
  void skip_inert(const Token& tok) {
    if (tok.name != "template") return;
    if (tok.type == Token::Type::StartTag) {
      ++inert_depth_;
    } else if (tok.type == Token::Type::EndTag && --inert_depth_ == 0) {
      if (auto i = find_open("template"); i > 0) pop_to(i);
    }
  }

  void on_text(const std::string& data) {
    if (kNoText.count(current_tag())) return;
    builder_.append_text(current(), data);
  }

  void on_start(Token tok) {
    saw_element_ = true;
    const std::string& name = tok.name;

    if (name == "html") {
      builder_.merge_attributes(0, tok.attrs);
      return;
    }
    if (name == "body" || name == "head") {
      if (auto i = find_open(name); i > 0) {
        builder_.merge_attributes(open_[static_cast<std::size_t>(i)], tok.attrs);
        return;
      }
      if (name == "body") {
        if (auto h = find_open("head"); h > 0) pop_to(h);
      }
    }

    if (!in_foreign()) {
      if (kClosesP.count(name)) close_p_in_button_scope();
      if (kHeadings.count(name) && kHeadings.count(current_tag())) open_.pop_back();
      if (name == "li") {
        close_nearest({"li"}, {"ul", "ol", "menu", "table", "body", "html"});
      } else if (name == "dd" || name == "dt") {
        close_nearest({"dd", "dt"}, {"dl", "table", "body", "html"});
      } else if (name == "option") {
        if (current_tag() == "option") open_.pop_back();
      } else if (name == "optgroup") {
        if (current_tag() == "option") open_.pop_back();
        if (current_tag() == "optgroup") open_.pop_back();
      } else if (name == "tr") {
        close_nearest({"tr"}, {"table", "tbody", "thead", "tfoot"});
      } else if (name == "td" || name == "th") {
        close_nearest({"td", "th"}, {"tr", "table"});
      } else if (name == "thead" || name == "tbody" || name == "tfoot") {
        close_nearest({"thead", "tbody", "tfoot"}, {"table"});
      } else if (name == "a") {
        if (auto i = find_open("a"); i > 0) pop_to(i);
      }
    }

    bool foreign = in_foreign() || name == "svg" || name == "math";
    NodeId id = builder_.add_element(current(), name, std::move(tok.attrs));
    if (kVoid.count(name) && !foreign) return;
    if (tok.self_closing && foreign) return;
    open_.push_back(id);
    if (name == "template" && !foreign) inert_depth_ = 1;
  }

  void on_end(const std::string& name) {
    if (name == "html" || name == "body") return;
    if (name == "head") {
      if (auto i = find_open("head"); i > 0) pop_to(i);
      return;
    }
    if (name == "br") {
      Token br{Token::Type::StartTag, "br", {}, false};
      on_start(std::move(br));
      return;
    }
    if (name == "p") {
      if (find_in_scope("p", {"button"}) < 0) {
        // </p> without an open p yields an empty paragraph
        builder_.add_element(current(), "p");
        saw_element_ = true;
        return;
      }
      generate_implied_end("p");
      pop_to(find_open("p"));
      return;
    }
    if (name == "li" || name == "dd" || name == "dt") {
      long in_scope =
          name == "li" ? find_in_scope(name, {"ol", "ul"}) : find_in_scope(name);
      if (in_scope < 0) return;
      generate_implied_end(name);
      pop_to(find_open(name));
      return;
    }
    if (kHeadings.count(name)) {
      for (long i = static_cast<long>(open_.size()) - 1; i > 0; --i) {
        const auto& t = tag_of(open_[static_cast<std::size_t>(i)]);
        if (kHeadings.count(t)) {
          pop_to(i);
          return;
        }
        if (kScopeBarrier.count(t)) return;
      }
      return;
    }
    if (kFormatting.count(name)) {
      if (auto i = find_open(name); i > 0) pop_to(i);
      return;
    }
    for (long i = static_cast<long>(open_.size()) - 1; i > 0; --i) {
      const auto& t = tag_of(open_[static_cast<std::size_t>(i)]);
      if (t == name) {
        generate_implied_end(name);
        pop_to(i);
        return;
      }
      if (kSpecial.count(t) && !in_foreign()) return;
    }
  }

  DomBuilder builder_;
  std::vector<NodeId> open_;
  bool saw_element_ = false;
  int inert_depth_ = 0;
};

void dump_node(const DomGraph& g, NodeId id, int depth, std::string& out) {
  const auto& v = g.node(id);
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  out += v.tag;
  for (const auto& [k, val] : v.attributes) {
    out += ' ';
    out += k;
    out += "=\"";
    out += val;
    out += '"';
  }
  out += '\n';
  auto run = v.runs.begin();
  for (std::size_t i = 0; i <= v.children.size(); ++i) {
    while (run != v.runs.end() && run->before_child == i) {
      auto t = text::normalize_whitespace(run->text);
      if (!t.empty()) {
        out.append(static_cast<std::size_t>(depth + 1) * 2, ' ');
        out += '"' + t + "\"\n";
      }
      ++run;
    }
    if (i < v.children.size()) dump_node(g, v.children[i], depth + 1, out);
  }
}

}  // namespace

std::optional<std::string> sniff_meta_charset(std::string_view head) {
  auto lower = text::to_lower_ascii(head.substr(0, 1024));
  std::size_t pos = 0;
  while ((pos = lower.find("<meta", pos)) != std::string::npos) {
    auto end = lower.find('>', pos);
    if (end == std::string::npos) end = lower.size();
    auto tag = std::string_view(lower).substr(pos, end - pos);
    auto cs = tag.find("charset");
    if (cs != std::string_view::npos) {
      std::size_t i = cs + 7;
      while (i < tag.size() && text::is_html_space(tag[i])) ++i;
      if (i < tag.size() && tag[i] == '=') {
        ++i;
        while (i < tag.size() && text::is_html_space(tag[i])) ++i;
        if (i < tag.size() && (tag[i] == '"' || tag[i] == '\'')) ++i;
        std::size_t start = i;
        while (i < tag.size() && tag[i] != '"' && tag[i] != '\'' && tag[i] != ';' &&
               tag[i] != '/' && !text::is_html_space(tag[i])) {
          ++i;
        }
        if (i > start) return std::string(tag.substr(start, i - start));
      }
    }
    pos = end;
  }
  return std::nullopt;
}

std::optional<std::string> charset_from_content_type(std::string_view content_type) {
  auto lower = text::to_lower_ascii(content_type);
  auto pos = lower.find("charset=");
  if (pos == std::string::npos) return std::nullopt;
  auto value = std::string_view(lower).substr(pos + 8);
  auto end = value.find(';');
  auto cs = text::trim(value.substr(0, end));
  if (!cs.empty() && (cs.front() == '"' || cs.front() == '\'')) cs.erase(0, 1);
  if (!cs.empty() && (cs.back() == '"' || cs.back() == '\'')) cs.pop_back();
  if (cs.empty()) return std::nullopt;
  return cs;
}

std::string decode_to_utf8(std::string_view body,
                           std::optional<std::string_view> encoding_hint) {
  if (body.substr(0, 3) == "\xEF\xBB\xBF") return decode_declared(body.substr(3), "utf-8");
  if (body.substr(0, 2) == "\xFF\xFE") return decode_with_iconv(body.substr(2), "UTF-16LE");
  if (body.substr(0, 2) == "\xFE\xFF") return decode_with_iconv(body.substr(2), "UTF-16BE");
  if (encoding_hint && !text::trim(*encoding_hint).empty()) {
    return decode_declared(body, *encoding_hint);
  }
  if (auto meta = sniff_meta_charset(body)) return decode_declared(body, *meta);
  if (text::is_valid_utf8(body)) return std::string(body);
  return decode_cp1252(body);
}

std::string decode_entities(std::string_view raw) { return decode_refs(raw, false); }

DomGraph parse_html(std::string_view body,
                    std::optional<std::string_view> encoding_hint) {
  if (body.empty()) throw EmptyDocument("empty body");
  auto decoded = decode_to_utf8(body, encoding_hint);
  TreeBuilder builder;
  Tokenizer(decoded).run(builder);
  if (!builder.saw_element()) throw EmptyDocument("no element found in document");
  return std::move(builder).finish();
}

std::string dump_tree(const DomGraph& graph) {
  std::string out;
  dump_node(graph, graph.root(), 0, out);
  return out;
}

}  // namespace scrapeflow
