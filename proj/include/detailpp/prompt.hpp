#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace detailpp {

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

enum class ModifierCategory { kColor, kTexture, kStyle, kOther };

std::string_view to_string(ModifierCategory category);

// Adjectives the grammar treats as modifiers. Any other non-reserved token is
// read as a noun.
class Lexicon {
 public:
  // Lines of "<category> <word>"; '#' starts a comment. Throws ConfigError on
  // malformed lines or unknown categories.
  static Lexicon parse(std::string_view text);
  static const Lexicon& builtin();

  std::optional<ModifierCategory> lookup(std::string_view word) const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::string, ModifierCategory, std::less<>> entries_;
};

// Contents of data/lexicon.txt, compiled in.
std::string_view builtin_lexicon_text();

// Lowercase, strip punctuation (hyphens and apostrophes inside a word are
// kept), split on whitespace. Throws ParseInputError when nothing remains.
std::vector<std::string> tokenize(std::string_view text);

// ---------------------------------------------------------------------------
// Prompt tree
// ---------------------------------------------------------------------------

struct Modifier {
  std::string word;
  ModifierCategory category = ModifierCategory::kOther;
  bool style_form = false;  // written as "<word> style"

  friend bool operator==(const Modifier&, const Modifier&) = default;
};

struct NounPhrase {
  std::string article;  // "a", "an", "the" or empty
  std::vector<Modifier> modifiers;
  std::vector<std::string> nouns;

  std::string head_text() const;  // nouns joined by spaces
  friend bool operator==(const NounPhrase&, const NounPhrase&) = default;
};

// "with"/"wearing"/"in" followed by a noun phrase, anchored to the clause head.
struct Attachment {
  std::string connective;
  NounPhrase phrase;

  // A modifier-free attachment ("with sunglasses") is itself an attribute of
  // the head noun. One carrying modifiers ("wearing a green tracksuit") names
  // a subject of its own and survives in the simplified prompt.
  bool is_attribute() const noexcept { return phrase.modifiers.empty(); }
  friend bool operator==(const Attachment&, const Attachment&) = default;
};

struct Clause {
  NounPhrase head;
  std::vector<Attachment> attachments;
  // "a <style> style <subject> in a <style> style <background>"
  bool scb_form = false;

  friend bool operator==(const Clause&, const Clause&) = default;
};

struct PromptTree {
  std::vector<Clause> clauses;
  std::string terminal;  // trailing punctuation of the source text, e.g. "."

  std::size_t modifier_count() const;
  friend bool operator==(const PromptTree&, const PromptTree&) = default;
};

// prompt := clause ("and" clause)*
// clause := article? modifier* noun+ attachment*
// attachment := ("with" | "wearing" | "in") article? modifier* noun+
// modifier := lexicon-adjective | word "style"
// Throws ParseError naming the first token index that does not fit.
PromptTree parse(const std::vector<std::string>& tokens,
                 const Lexicon& lexicon = Lexicon::builtin());

// tokenize + parse, keeping the source's trailing punctuation for rendering.
PromptTree parse_prompt(std::string_view text, const Lexicon& lexicon = Lexicon::builtin());

std::vector<std::string> render_tokens(const PromptTree& tree);
std::string render(const PromptTree& tree);

// ---------------------------------------------------------------------------
// Decomposition
// ---------------------------------------------------------------------------

enum class DecompositionConfig { kA, kB, kC, kD, kAccumulative };

std::string_view to_string(DecompositionConfig config);
// Accepts "A".."D" (any case), "accum", "accumulative". Throws ConfigError.
DecompositionConfig parse_decomposition_config(std::string_view text);

// Half-open token range.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return end <= begin; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

// Sub-prompts p_0..p_n (p_0 dropped for configs C, D and accumulative) with
// the subject q_i that each attribute branch p_{i+1} modifies.
struct PromptPlan {
  DecompositionConfig config = DecompositionConfig::kB;
  bool includes_original = true;
  std::vector<std::string> sub_prompts;  // branch order, first entry is p_{first_index()}
  std::vector<std::string> subjects;     // q_1..q_{n-1}
  std::vector<TokenSpan> subject_spans;  // q_i inside tokenize(p_{i+1})
  std::vector<TokenSpan> first_branch_spans;  // q_i inside the first sub-prompt

  std::size_t first_index() const noexcept { return includes_original ? 0 : 1; }
  // n, the index of the last sub-prompt.
  std::size_t last_index() const noexcept { return first_index() + sub_prompts.size() - 1; }
  std::size_t branch_count() const noexcept { return sub_prompts.size(); }
  // Sub-prompt by its p-index. Throws IndexError.
  const std::string& prompt(std::size_t p_index) const;

  friend bool operator==(const PromptPlan&, const PromptPlan&) = default;
};

PromptPlan decompose(const PromptTree& tree, DecompositionConfig config = DecompositionConfig::kB);

// Token range of q_branch inside p_{branch+1}. Throws IndexError unless
// 1 <= branch <= n-1.
TokenSpan subject_span(const PromptPlan& plan, std::size_t branch);

// One line per branch: "index<TAB>sub-prompt<TAB>subject-or-dash\n".
std::string format_plan(const PromptPlan& plan);

}  // namespace detailpp
