#include "detailpp/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "detailpp/errors.hpp"

namespace detailpp {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

bool is_article(std::string_view t) { return t == "a" || t == "an" || t == "the"; }

bool is_connective(std::string_view t) { return t == "with" || t == "wearing" || t == "in"; }

bool is_reserved(std::string_view t) {
  return is_article(t) || is_connective(t) || t == "and" || t == "style";
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

class Parser {
 public:
  Parser(const std::vector<std::string>& tokens, const Lexicon& lexicon)
      : tokens_(tokens), lexicon_(lexicon) {}

  PromptTree run() {
    if (tokens_.empty()) throw ParseInputError("parse: empty token list");
    PromptTree tree;
    tree.clauses.push_back(clause());
    while (pos_ < tokens_.size()) {
      if (tokens_[pos_] != "and") fail("expected 'and' or end of prompt");
      ++pos_;
      tree.clauses.push_back(clause());
    }
    return tree;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    std::ostringstream msg;
    msg << "parse error at token " << pos_;
    if (pos_ < tokens_.size()) {
      msg << " ('" << tokens_[pos_] << "')";
    } else {
      msg << " (end of input)";
    }
    msg << ": " << why;
    throw ParseError(pos_, msg.str());
  }

  bool at_end() const { return pos_ >= tokens_.size(); }
  const std::string& peek(std::size_t ahead = 0) const {
    static const std::string empty;
    return pos_ + ahead < tokens_.size() ? tokens_[pos_ + ahead] : empty;
  }

  bool at_style_modifier() const {
    return !at_end() && !is_reserved(peek()) && peek(1) == "style";
  }

  bool at_lexicon_modifier() const {
    return !at_end() && !is_reserved(peek()) && lexicon_.lookup(peek()).has_value();
  }

  NounPhrase noun_phrase() {
    NounPhrase np;
    if (!at_end() && is_article(peek())) np.article = tokens_[pos_++];
    for (;;) {
      if (at_style_modifier()) {
        np.modifiers.push_back({tokens_[pos_], ModifierCategory::kStyle, true});
        pos_ += 2;
      } else if (at_lexicon_modifier()) {
        np.modifiers.push_back({tokens_[pos_], *lexicon_.lookup(peek()), false});
        ++pos_;
      } else {
        break;
      }
    }
    while (!at_end() && !is_reserved(peek()) && !at_style_modifier() && !at_lexicon_modifier()) {
      np.nouns.push_back(tokens_[pos_++]);
    }
    if (np.nouns.empty()) fail("expected a noun");
    return np;
  }

  Clause clause() {
    Clause c;
    c.head = noun_phrase();
    while (!at_end() && is_connective(peek())) {
      Attachment a;
      a.connective = tokens_[pos_++];
      a.phrase = noun_phrase();
      c.attachments.push_back(std::move(a));
    }
    auto styled_only = [](const NounPhrase& np) {
      return np.article == "a" && np.modifiers.size() == 1 && np.modifiers[0].style_form;
    };
    c.scb_form = styled_only(c.head) && c.attachments.size() == 1 &&
                 c.attachments[0].connective == "in" && styled_only(c.attachments[0].phrase);
    return c;
  }

  const std::vector<std::string>& tokens_;
  const Lexicon& lexicon_;
  std::size_t pos_ = 0;
};

// An attribute is one unit of detail that a branch can add back: either a
// single modifier on a noun phrase or a whole modifier-free attachment.
struct AttributeRef {
  std::size_t clause = 0;
  std::ptrdiff_t phrase = -1;  // -1: clause head, otherwise attachment index
  std::size_t modifier = 0;    // for adjective attributes
  bool is_attachment = false;
};

struct SubjectRef {
  std::size_t clause = 0;
  std::ptrdiff_t phrase = -1;
  bool operator==(const SubjectRef&) const = default;
};

struct SubjectGroup {
  SubjectRef subject;
  std::vector<std::size_t> attributes;  // indices into the attribute list
};

struct AttributeIndex {
  std::vector<AttributeRef> attributes;
  std::vector<SubjectRef> attribute_subject;
  std::vector<SubjectGroup> groups;  // only subjects with at least one attribute
};

// Subjects in order of appearance; each subject's attributes left to right.
AttributeIndex index_attributes(const PromptTree& tree) {
  AttributeIndex idx;
  auto add = [&](SubjectGroup& g, AttributeRef ref) {
    g.attributes.push_back(idx.attributes.size());
    idx.attributes.push_back(ref);
    idx.attribute_subject.push_back(g.subject);
  };
  for (std::size_t ci = 0; ci < tree.clauses.size(); ++ci) {
    const Clause& c = tree.clauses[ci];
    SubjectGroup head{{ci, -1}, {}};
    for (std::size_t m = 0; m < c.head.modifiers.size(); ++m) add(head, {ci, -1, m, false});
    for (std::size_t a = 0; a < c.attachments.size(); ++a) {
      if (c.attachments[a].is_attribute()) {
        add(head, {ci, static_cast<std::ptrdiff_t>(a), 0, true});
      }
    }
    if (!head.attributes.empty()) idx.groups.push_back(std::move(head));
    for (std::size_t a = 0; a < c.attachments.size(); ++a) {
      const Attachment& att = c.attachments[a];
      if (att.is_attribute()) continue;
      SubjectGroup g{{ci, static_cast<std::ptrdiff_t>(a)}, {}};
      for (std::size_t m = 0; m < att.phrase.modifiers.size(); ++m) {
        add(g, {ci, static_cast<std::ptrdiff_t>(a), m, false});
      }
      idx.groups.push_back(std::move(g));
    }
  }
  return idx;
}

struct Rendered {
  std::vector<std::string> tokens;
  std::map<std::pair<std::size_t, std::ptrdiff_t>, TokenSpan> noun_spans;
};

// Renders the tree keeping only the attributes flagged in `active`.
Rendered render_subset(const PromptTree& tree, const AttributeIndex& idx,
                       const std::vector<bool>& active) {
  auto is_active = [&](std::size_t ci, std::ptrdiff_t phrase, std::size_t m, bool attachment) {
    for (std::size_t k = 0; k < idx.attributes.size(); ++k) {
      const auto& r = idx.attributes[k];
      if (r.clause == ci && r.phrase == phrase && r.is_attachment == attachment &&
          (attachment || r.modifier == m)) {
        return static_cast<bool>(active[k]);
      }
    }
    return true;
  };

  Rendered out;
  auto emit_phrase = [&](const NounPhrase& np, std::size_t ci, std::ptrdiff_t phrase,
                         bool filter_modifiers) {
    if (!np.article.empty()) out.tokens.push_back(np.article);
    for (std::size_t m = 0; m < np.modifiers.size(); ++m) {
      if (filter_modifiers && !is_active(ci, phrase, m, false)) continue;
      out.tokens.push_back(np.modifiers[m].word);
      if (np.modifiers[m].style_form) out.tokens.push_back("style");
    }
    TokenSpan span{out.tokens.size(), out.tokens.size() + np.nouns.size()};
    out.tokens.insert(out.tokens.end(), np.nouns.begin(), np.nouns.end());
    out.noun_spans[{ci, phrase}] = span;
  };

  for (std::size_t ci = 0; ci < tree.clauses.size(); ++ci) {
    const Clause& c = tree.clauses[ci];
    if (ci > 0) out.tokens.push_back("and");
    emit_phrase(c.head, ci, -1, true);
    for (std::size_t a = 0; a < c.attachments.size(); ++a) {
      const Attachment& att = c.attachments[a];
      const auto phrase = static_cast<std::ptrdiff_t>(a);
      if (att.is_attribute()) {
        if (!is_active(ci, phrase, 0, true)) continue;
        out.tokens.push_back(att.connective);
        emit_phrase(att.phrase, ci, phrase, false);
      } else {
        out.tokens.push_back(att.connective);
        emit_phrase(att.phrase, ci, phrase, true);
      }
    }
  }
  return out;
}

std::string subject_text(const PromptTree& tree, const SubjectRef& s) {
  const Clause& c = tree.clauses[s.clause];
  return s.phrase < 0 ? c.head.head_text()
                      : c.attachments[static_cast<std::size_t>(s.phrase)].phrase.head_text();
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(ModifierCategory category) {
  switch (category) {
    case ModifierCategory::kColor: return "color";
    case ModifierCategory::kTexture: return "texture";
    case ModifierCategory::kStyle: return "style";
    case ModifierCategory::kOther: return "other";
  }
  return "other";
}

Lexicon Lexicon::parse(std::string_view text) {
  Lexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string category, word, extra;
    if (!(fields >> category)) continue;
    if (!(fields >> word) || (fields >> extra)) {
      throw ConfigError("lexicon line " + std::to_string(line_no) + ": expected '<category> <word>'");
    }
    ModifierCategory cat;
    if (category == "color") {
      cat = ModifierCategory::kColor;
    } else if (category == "texture") {
      cat = ModifierCategory::kTexture;
    } else if (category == "style") {
      cat = ModifierCategory::kStyle;
    } else if (category == "other") {
      cat = ModifierCategory::kOther;
    } else {
      throw ConfigError("lexicon line " + std::to_string(line_no) + ": unknown category '" +
                        category + "'");
    }
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    lex.entries_[word] = cat;
  }
  return lex;
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon lex = Lexicon::parse(builtin_lexicon_text());
  return lex;
}

std::optional<ModifierCategory> Lexicon::lookup(std::string_view word) const {
  if (auto it = entries_.find(word); it != entries_.end()) return it->second;
  return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    // Inner hyphens/apostrophes survive; leading or trailing ones do not.
    while (!current.empty() && (current.back() == '-' || current.back() == '\'')) current.pop_back();
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if ((c == '-' || c == '\'') && !current.empty()) {
      current += ch;
    } else {
      flush();
    }
  }
  flush();
  if (tokens.empty()) throw ParseInputError("tokenize: empty prompt");
  return tokens;
}

std::string NounPhrase::head_text() const { return join(nouns); }

std::size_t PromptTree::modifier_count() const {
  std::size_t n = 0;
  for (const auto& c : clauses) {
    n += c.head.modifiers.size();
    for (const auto& a : c.attachments) n += a.is_attribute() ? 1 : a.phrase.modifiers.size();
  }
  return n;
}

PromptTree parse(const std::vector<std::string>& tokens, const Lexicon& lexicon) {
  return Parser(tokens, lexicon).run();
}

PromptTree parse_prompt(std::string_view text, const Lexicon& lexicon) {
  PromptTree tree = parse(tokenize(text), lexicon);
  auto end = text.find_last_not_of(" \t\r\n");
  std::size_t begin = end + 1;
  while (begin > 0 && (text[begin - 1] == '.' || text[begin - 1] == '!' || text[begin - 1] == '?')) {
    --begin;
  }
  tree.terminal = std::string(text.substr(begin, end + 1 - begin));
  return tree;
}

std::vector<std::string> render_tokens(const PromptTree& tree) {
  const AttributeIndex idx = index_attributes(tree);
  return render_subset(tree, idx, std::vector<bool>(idx.attributes.size(), true)).tokens;
}

std::string render(const PromptTree& tree) { return join(render_tokens(tree)) + tree.terminal; }

// ---------------------------------------------------------------------------

std::string_view to_string(DecompositionConfig config) {
  switch (config) {
    case DecompositionConfig::kA: return "A";
    case DecompositionConfig::kB: return "B";
    case DecompositionConfig::kC: return "C";
    case DecompositionConfig::kD: return "D";
    case DecompositionConfig::kAccumulative: return "accum";
  }
  return "B";
}

DecompositionConfig parse_decomposition_config(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "a") return DecompositionConfig::kA;
  if (t == "b") return DecompositionConfig::kB;
  if (t == "c") return DecompositionConfig::kC;
  if (t == "d") return DecompositionConfig::kD;
  if (t == "accum" || t == "accumulative") return DecompositionConfig::kAccumulative;
  throw ConfigError("unknown decomposition config '" + std::string(text) + "'");
}

const std::string& PromptPlan::prompt(std::size_t p_index) const {
  if (p_index < first_index() || p_index > last_index()) {
    throw IndexError("sub-prompt index " + std::to_string(p_index) + " out of range");
  }
  return sub_prompts[p_index - first_index()];
}

PromptPlan decompose(const PromptTree& tree, DecompositionConfig config) {
  const AttributeIndex idx = index_attributes(tree);
  const std::size_t n_attr = idx.attributes.size();

  PromptPlan plan;
  plan.config = config;
  const auto all_on = std::vector<bool>(n_attr, true);
  if (n_attr == 0) {
    plan.sub_prompts.push_back(join(render_subset(tree, idx, all_on).tokens) + tree.terminal);
    return plan;
  }

  // One active-set per attribute branch p_2..p_n, plus the subject it binds.
  std::vector<std::vector<bool>> branch_sets;
  std::vector<SubjectRef> branch_subjects;
  switch (config) {
    case DecompositionConfig::kA:
    case DecompositionConfig::kC:
      for (const auto& g : idx.groups) {
        std::vector<bool> s(n_attr, false);
        for (auto k : g.attributes) s[k] = true;
        branch_sets.push_back(std::move(s));
        branch_subjects.push_back(g.subject);
      }
      break;
    case DecompositionConfig::kB:
    case DecompositionConfig::kD:
    case DecompositionConfig::kAccumulative: {
      std::vector<bool> running(n_attr, false);
      for (const auto& g : idx.groups) {
        for (auto k : g.attributes) {
          std::vector<bool> s(n_attr, false);
          running[k] = true;
          if (config == DecompositionConfig::kAccumulative) {
            s = running;
          } else {
            s[k] = true;
          }
          branch_sets.push_back(std::move(s));
          branch_subjects.push_back(g.subject);
        }
      }
      break;
    }
  }

  plan.includes_original = config == DecompositionConfig::kA || config == DecompositionConfig::kB;
  const Rendered base = render_subset(tree, idx, std::vector<bool>(n_attr, false));
  const Rendered original = render_subset(tree, idx, all_on);
  const Rendered& first = plan.includes_original ? original : base;

  if (plan.includes_original) plan.sub_prompts.push_back(join(original.tokens) + tree.terminal);
  plan.sub_prompts.push_back(join(base.tokens) + tree.terminal);
  for (std::size_t b = 0; b < branch_sets.size(); ++b) {
    const Rendered r = render_subset(tree, idx, branch_sets[b]);
    const SubjectRef& s = branch_subjects[b];
    plan.sub_prompts.push_back(join(r.tokens) + tree.terminal);
    plan.subjects.push_back(subject_text(tree, s));
    plan.subject_spans.push_back(r.noun_spans.at({s.clause, s.phrase}));
    plan.first_branch_spans.push_back(first.noun_spans.at({s.clause, s.phrase}));
  }
  return plan;
}

TokenSpan subject_span(const PromptPlan& plan, std::size_t branch) {
  if (branch < 1 || branch > plan.subjects.size()) {
    throw IndexError("subject_span: branch " + std::to_string(branch) + " outside 1.." +
                     std::to_string(plan.subjects.size()));
  }
  return plan.subject_spans[branch - 1];
}

std::string format_plan(const PromptPlan& plan) {
  std::string out;
  for (std::size_t k = plan.first_index(); k <= plan.last_index(); ++k) {
    out += std::to_string(k);
    out += '\t';
    out += plan.prompt(k);
    out += '\t';
    out += k >= 2 ? plan.subjects[k - 2] : std::string("-");
    out += '\n';
  }
  return out;
}

}  // namespace detailpp
