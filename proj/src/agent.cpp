#include "sumvln/agent.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "sumvln/codec.hpp"
#include "sumvln/error.hpp"

namespace sumvln {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Trims whitespace plus the punctuation left behind by the separators.
std::string_view trim_clause(std::string_view s) {
  auto junk = [](char c) { return is_space(c) || c == ',' || c == ';'; };
  while (!s.empty() && junk(s.front())) s.remove_prefix(1);
  while (!s.empty() && junk(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_sentences(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 < text.size() && !is_space(text[i + 1])) continue;  // "2.5", "e.g"
    out.push_back(text.substr(begin, i - begin));
    begin = i + 1;
  }
  out.push_back(text.substr(begin));
  return out;
}

// Case-insensitive separator match at `pos`, requiring word boundaries where
// the separator starts or ends with a letter.
bool separator_at(std::string_view s, std::size_t pos, std::string_view sep) {
  if (pos + sep.size() > s.size()) return false;
  for (std::size_t k = 0; k < sep.size(); ++k) {
    if (std::tolower(static_cast<unsigned char>(s[pos + k])) != sep[k]) return false;
  }
  if (is_alpha(sep.front()) && pos > 0 && is_alpha(s[pos - 1])) return false;
  const std::size_t end = pos + sep.size();
  if (is_alpha(sep.back()) && end < s.size() && is_alpha(s[end])) return false;
  return true;
}

void split_clauses(std::string_view sentence, std::vector<std::string>& out) {
  static constexpr std::array<std::string_view, 3> kSeparators = {", then", "and then", "; "};
  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < sentence.size()) {
    std::size_t matched = 0;
    for (auto sep : kSeparators) {
      if (separator_at(sentence, i, sep)) {
        matched = sep.size();
        break;
      }
    }
    if (matched == 0) {
      ++i;
      continue;
    }
    auto piece = trim_clause(sentence.substr(begin, i - begin));
    if (!piece.empty()) out.emplace_back(piece);
    i += matched;
    begin = i;
  }
  auto piece = trim_clause(sentence.substr(begin));
  if (!piece.empty()) out.emplace_back(piece);
}

constexpr std::array<std::string_view, 4> kPlaceholders = {"instruction", "subtasks", "history", "step"};

const std::string* placeholder_value(std::string_view name, const PromptValues& v) {
  if (name == "instruction") return &v.instruction;
  if (name == "subtasks") return &v.subtasks;
  if (name == "history") return &v.history;
  if (name == "step") return &v.step;
  return nullptr;
}

void check_placeholders(std::string_view text) {
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string_view::npos) {
    const std::size_t close = text.find("}}", pos + 2);
    if (close == std::string_view::npos) {
      throw Error(ErrorCode::UnresolvedPlaceholder, "unterminated '{{' in prompt template");
    }
    const std::string_view name = text.substr(pos + 2, close - pos - 2);
    if (std::find(kPlaceholders.begin(), kPlaceholders.end(), name) == kPlaceholders.end()) {
      throw Error(ErrorCode::UnresolvedPlaceholder, "unknown placeholder '{{" + std::string(name) + "}}'");
    }
    pos = close + 2;
  }
}

constexpr std::string_view kBuiltinTemplate =
    R"(You steer a small ground robot through farms, greenhouses, forests, mountains, gardens and villages.
Every reply has four tagged sections in this order:
<recall>what the spatial memory images say about the layout</recall>
<observe>what the latest camera frames show</observe>
<decide>which subtask you are on and why the next action serves it</decide>
<action>one of FORWARD, LEFT_ROTATE, RIGHT_ROTATE, STOP</action>
FORWARD drives 0.5 m ahead. LEFT_ROTATE and RIGHT_ROTATE turn 30 degrees in place.
Reply STOP only when the person named in the instruction is close in front of you.
---
Instruction: {{instruction}}
Subtasks:
{{subtasks}}
Actions so far: {{history}}
Step: {{step}}
Give your four sections now.
)";

std::string join_subtasks(const SubtaskList& s) {
  std::string out;
  for (std::size_t i = 0; i < s.subtasks.size(); ++i) {
    out += std::to_string(i + 1) + ". " + s.subtasks[i];
    if (i == s.cursor) out += "  <- current";
    if (i + 1 < s.subtasks.size()) out += '\n';
  }
  return out;
}

std::string join_history(std::span<const ActionType> history) {
  if (history.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i) out += ", ";
    out += to_string(history[i]);
  }
  return out;
}

struct TagSlice {
  bool found = false;
  std::string_view text;
};

TagSlice find_tag(std::string_view raw, std::string_view name) {
  const std::string open = "<" + std::string(name) + ">";
  const std::string close = "</" + std::string(name) + ">";
  const std::size_t a = raw.find(open);
  if (a == std::string_view::npos) return {};
  const std::size_t body = a + open.size();
  const std::size_t b = raw.find(close, body);
  if (b == std::string_view::npos) return {};
  return {true, raw.substr(body, b - body)};
}

}  // namespace

SubtaskList decompose_instruction(std::string_view instruction) {
  SubtaskList out;
  for (auto sentence : split_sentences(instruction)) split_clauses(sentence, out.subtasks);
  if (out.subtasks.empty()) throw Error(ErrorCode::EmptyInstruction, "instruction has no content");
  return out;
}

PromptTemplate PromptTemplate::parse(std::string_view text) {
  PromptTemplate t;
  std::size_t pos = 0;
  bool in_user = false;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    const bool last = nl == std::string_view::npos;
    if (last) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!in_user && line == "---") {
      in_user = true;
    } else {
      std::string& dst = in_user ? t.user_text : t.system_text;
      dst.append(text.substr(pos, nl - pos));
      if (!last) dst.push_back('\n');
    }
    if (last) break;
    pos = nl + 1;
  }
  if (!in_user) {
    t.user_text = std::move(t.system_text);
    t.system_text.clear();
  }
  t.validate();
  return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

const PromptTemplate& PromptTemplate::builtin() {
  static const PromptTemplate t = parse(kBuiltinTemplate);
  return t;
}

void PromptTemplate::validate() const {
  check_placeholders(system_text);
  check_placeholders(user_text);
}

std::string fill_placeholders(std::string_view text, const PromptValues& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw Error(ErrorCode::UnresolvedPlaceholder, "unterminated '{{' in prompt template");
    }
    const std::string_view name = text.substr(open + 2, close - open - 2);
    const std::string* value = placeholder_value(name, values);
    if (!value) throw Error(ErrorCode::UnresolvedPlaceholder, "unknown placeholder '{{" + std::string(name) + "}}'");
    out.append(text.substr(pos, open - pos));
    out.append(*value);
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

nlohmann::json ModelRequest::to_json() const {
  nlohmann::json parts_json = nlohmann::json::array();
  for (const auto& p : parts) {
    nlohmann::json part = nlohmann::json::object();
    if (p.kind == RequestPart::Kind::text) {
      part["type"] = "text";
      part["data"] = p.text;
    } else {
      part["type"] = "image";
      part["data"] = base64_encode(encode_png(p.image));
    }
    parts_json.push_back(std::move(part));
  }
  nlohmann::json j = nlohmann::json::object();
  j["system"] = system;
  j["parts"] = std::move(parts_json);
  return j;
}

std::string ModelRequest::serialize() const { return to_json().dump(); }

ModelRequest build_request(const PromptTemplate& tmpl, const RequestInputs& in) {
  if (in.recent_frames.empty()) throw Error(ErrorCode::EmptyInput, "build_request needs at least one frame");
  PromptValues values;
  values.instruction = in.instruction;
  values.subtasks = in.subtasks ? join_subtasks(*in.subtasks) : std::string("1. ") + in.instruction;
  values.history = join_history(in.history);
  values.step = std::to_string(in.step);

  ModelRequest req;
  req.system = fill_placeholders(tmpl.system_text, values);
  for (const auto& view : in.memory) {
    const std::string label = view.perspective == Perspective::frontal
                                  ? "Spatial memory, frontal view from the start pose:"
                                  : "Spatial memory, oblique view looking down over the scene:";
    req.parts.push_back({RequestPart::Kind::text, label, {}});
    req.parts.push_back({RequestPart::Kind::image, {}, view.image});
    ++req.memory_attachments;
  }
  const std::size_t window = std::min(in.history_window, in.recent_frames.size());
  for (const auto& f : in.recent_frames.last(window)) {
    req.parts.push_back({RequestPart::Kind::text, "Camera frame at step " + std::to_string(f.step_index) + ":", {}});
    req.parts.push_back({RequestPart::Kind::image, {}, f.image});
    ++req.frame_attachments;
  }
  req.parts.push_back({RequestPart::Kind::text, fill_placeholders(tmpl.user_text, values), {}});
  return req;
}

std::string compose_output(ActionType action, std::string_view recall, std::string_view observe,
                           std::string_view decide) {
  std::string out;
  out.reserve(recall.size() + observe.size() + decide.size() + 96);
  out.append("<recall>").append(recall).append("</recall>");
  out.append("<observe>").append(observe).append("</observe>");
  out.append("<decide>").append(decide).append("</decide>");
  out.append("<action>").append(to_string(action)).append("</action>");
  return out;
}

ModelOutput parse_output(std::string_view raw, ParseMode mode) {
  ModelOutput out;
  out.raw = std::string(raw);

  const TagSlice action = find_tag(raw, "action");
  if (!action.found) throw Error(ErrorCode::MissingActionTag, "no <action>...</action> pair in model output");
  std::string token(trim(action.text));
  for (char& c : token) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (c == ' ' || c == '-') c = '_';
  }
  const auto parsed = action_from_string(token);
  if (!parsed) throw Error(ErrorCode::InvalidAction, "'" + std::string(trim(action.text)) + "' is not an action");
  out.action = *parsed;

  const std::array<std::pair<std::string_view, std::string*>, 3> sections = {
      {{"recall", &out.memory_thought}, {"observe", &out.observation_thought}, {"decide", &out.decision_thought}}};
  for (const auto& [name, dst] : sections) {
    const TagSlice s = find_tag(raw, name);
    if (s.found) {
      *dst = std::string(s.text);
    } else if (mode == ParseMode::strict) {
      throw Error(ErrorCode::MissingSection, "model output lacks <" + std::string(name) + ">");
    }
  }
  return out;
}

std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::scripted_oracle: return "scripted_oracle";
    case PolicyKind::random: return "random";
    case PolicyKind::fixed: return "fixed";
    case PolicyKind::remote: return "remote";
  }
  return "fixed";
}

PolicyKind policy_kind_from_string(std::string_view s) {
  std::string norm(s);
  std::replace(norm.begin(), norm.end(), '-', '_');
  for (auto k : {PolicyKind::scripted_oracle, PolicyKind::random, PolicyKind::fixed, PolicyKind::remote}) {
    if (to_string(k) == norm) return k;
  }
  throw Error(ErrorCode::BadArgs, "unknown policy '" + std::string(s) + "'");
}

}  // namespace sumvln
