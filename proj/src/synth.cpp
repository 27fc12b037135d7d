#include "eli/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "eli/error.hpp"
#include "eli/jsonl.hpp"
#include "json.hpp"

namespace eli {

namespace {

const std::vector<std::string> kDrugs = {
    "metformin",      "insulin glargine", "atorvastatin",   "lisinopril",     "amlodipine",
    "erythromycin",   "azithromycin",     "ibuprofen",      "paracetamol",    "morphine",
    "ketamine",       "dexamethasone",    "prednisolone",   "omeprazole",     "ondansetron",
    "sertraline",     "fluoxetine",       "melatonin",      "magnesium sulfate", "oxytocin",
    "misoprostol",    "tranexamic acid",  "enoxaparin",     "clopidogrel",    "budesonide",
    "salbutamol",     "montelukast",      "gabapentin",     "pregabalin",     "lidocaine",
    "probiotics",     "zinc",             "nifedipine",     "labetalol",      "ranitidine",
    "dapagliflozin",  "empagliflozin",    "rosuvastatin",   "celecoxib",      "tramadol"};

const std::vector<std::string> kTherapies = {"acupuncture", "cognitive behavioural therapy",
                                             "supervised exercise training", "mindfulness training",
                                             "nurse-led education", "home visits"};

const std::vector<std::string> kDoseForms = {"{} 500 mg", "{} 20 mg daily", "low-dose {}",
                                             "{} 0.5 mg/kg", "oral {}", "{} 10 mg twice daily"};

const std::vector<std::string> kComparators = {"placebo",        "usual care",     "standard care",
                                               "saline placebo", "no intervention", "sham treatment",
                                               "matching placebo"};

const std::vector<std::string> kExtraneous = {"routine antenatal care", "iron supplements",
                                              "standard physiotherapy", "dietary counselling",
                                              "folic acid",             "calcium supplements",
                                              "background analgesia",   "vitamin D"};

const std::vector<std::string> kOutcomes = {
    "HbA1c levels",       "systolic blood pressure", "pain scores",        "length of hospital stay",
    "quality of life",    "preterm delivery",        "low birth weight",   "mortality",
    "wound healing",      "exercise capacity",       "depression scores",  "sleep quality",
    "LDL cholesterol",    "forced expiratory volume", "time to recovery",  "blood loss",
    "birth weight",       "serum ferritin",          "symptom scores",     "walking distance",
    "anxiety scores",     "functional independence", "relapse rate",       "body weight",
    "caesarean section rate", "fasting glucose",     "opioid consumption", "readmission rate"};

const std::vector<std::string> kAdverse = {"adverse events",        "nausea and vomiting",
                                           "postoperative complications", "side effects",
                                           "gastrointestinal symptoms", "headache frequency",
                                           "hypoglycaemic episodes", "respiratory infections",
                                           "withdrawal symptoms",   "bleeding episodes"};

const std::vector<std::string> kConditions = {
    "type 2 diabetes", "hypertension",  "chronic low back pain", "preterm labour", "major depression",
    "asthma",          "knee osteoarthritis", "insomnia",        "postoperative pain", "heart failure"};

// Evidence templates. {I} intervention, {C} comparator, {O} outcome.
const std::vector<std::string> kIncreased = {
    "{O} was significantly higher in the {I} group than in the {C} group .",
    "{I} significantly increased {O} compared with {C} .",
    "Patients receiving {I} showed greater {O} than those receiving {C} ( p < 0.01 ) .",
    "{O} improved significantly more with {I} than with {C} .",
    "Compared with {C} , {I} led to a significant rise in {O} .",
    "{O} increased significantly compared with {C} .",
    "A significant increase in {O} was observed in the treatment group ( p = 0.002 ) ."};

const std::vector<std::string> kDecreased = {
    "{I} significantly reduced {O} compared with {C} .",
    "{O} was significantly lower in the {I} group than in the {C} group .",
    "A significant decrease in {O} was observed with {I} versus {C} .",
    "Compared with {C} , {I} resulted in fewer {O} ( p < 0.001 ) .",
    "{O} was significantly reduced compared with {C} .",
    "{O} declined significantly in the treatment arm ( p = 0.01 ) ."};

const std::vector<std::string> kNoDiff = {
    "There was no significant difference in {O} between {I} and {C} .",
    "{O} did not differ significantly between the {I} and {C} groups .",
    "{I} had little effect in reducing {O} compared with {C} ( p = 0.4 ) .",
    "{O} was similar with {I} and {C} ( p = 0.62 ) .",
    "No significant differences were found for {O} .",
    "{O} was comparable between the two groups ( p = 0.35 ) ."};

// Decreases in an undesirable outcome phrased as an improvement.
const std::vector<std::string> kInverted = {"{O} were improved with {I} compared with {C} .",
                                            "{I} improved {O} relative to {C} .",
                                            "{O} showed significant improvement with {I} versus {C} ."};

// Two outcomes sharing one no-difference finding.
const std::vector<std::string> kNoDiffPair = {
    "{I} had little effect in reducing {O} ( 8 % vs 11 % , p = 0.4 ) or {O2} ( 13 % vs 15 % , p = 0.7 ) .",
    "Neither {O} nor {O2} differed significantly between {I} and {C} ."};

// Multi-arm evidence names its own arm.
const std::vector<std::string> kArmIncreased = {"In the {I} arm , {O} was significantly higher than with {C} .",
                                                "Compared with {C} , {I} significantly increased {O} ."};
const std::vector<std::string> kArmDecreased = {"In the {I} arm , {O} was significantly lower than with {C} .",
                                                "Compared with {C} , {I} significantly reduced {O} ."};
const std::vector<std::string> kArmNoDiff = {"In the {I} arm , {O} did not differ from {C} .",
                                             "Compared with {C} , {I} had no significant effect on {O} ."};

const std::vector<std::string> kBackground = {
    "{COND} is a major cause of morbidity worldwide .",
    "The effect of {I} in patients with {COND} remains uncertain .",
    "We assessed whether {I} improves outcomes in {COND} .",
    "Few trials have examined treatment options for {COND} ."};

const std::vector<std::string> kConclusion = {
    "{I} may be considered for patients with {COND} .", "Further trials of {I} are warranted .",
    "These findings support current guidance for {COND} .",
    "Larger studies are needed to confirm these results ."};

struct Piece {
  std::string text;
  std::string entity;  // empty for plain text
  EntityType type = EntityType::Intervention;
};

struct Slots {
  std::map<std::string, Piece> values;
};

std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

struct DocBuilder {
  std::vector<std::string> tokens;
  std::vector<TokenSpan> sentences;
  struct Tagged {
    TokenSpan span;
    EntityType type;
    std::string entity;
  };
  std::vector<Tagged> tagged;

  // Appends one sentence; returns its index.
  std::size_t add(const std::string& pattern, const Slots& slots) {
    const std::size_t start = tokens.size();
    for (const auto& word : split_words(pattern)) {
      auto it = slots.values.find(word);
      if (it == slots.values.end()) {
        tokens.push_back(word);
        continue;
      }
      const Piece& p = it->second;
      const std::size_t s = tokens.size();
      for (const auto& w : simple_tokens(p.text)) tokens.push_back(w);
      if (!p.entity.empty()) tagged.push_back(Tagged{TokenSpan{s, tokens.size()}, p.type, p.entity});
    }
    if (tokens.size() > start) tokens[start] = capitalized(tokens[start]);
    sentences.push_back(TokenSpan{start, tokens.size()});
    return sentences.size() - 1;
  }
};

struct PlannedRelation {
  std::string intervention, comparator, outcome;
  Direction direction;
  std::size_t sentence;
  bool hard;
};

std::string dose_form(const std::string& drug, Rng& rng) {
  std::string form = rng.pick(kDoseForms);
  return form.replace(form.find("{}"), 2, drug);
}

// Text of the sentence span, from the character offsets of the document.
std::pair<std::size_t, std::size_t> sentence_chars(const Document& d, std::size_t s) {
  const TokenSpan span = d.sentences()[s];
  return {d.tokens()[span.start].char_start, d.tokens()[span.end - 1].char_end};
}

SynthDocument assemble(const std::string& doc_id, const DocBuilder& b, const std::vector<PlannedRelation>& planned,
                       const std::map<std::string, std::string>& prompt_text) {
  std::string text;
  for (std::size_t k = 0; k < b.tokens.size(); ++k) {
    if (k > 0) text += ' ';
    text += b.tokens[k];
  }
  Document doc = Document::from_text(doc_id, text);
  if (doc.num_tokens() != b.tokens.size() || doc.sentences() != b.sentences) {
    throw InvalidArgument("synthetic template tokenizes inconsistently: " + text);
  }
  std::vector<Mention> mentions;
  std::vector<Entity> entities;
  std::map<std::string, std::size_t> entity_index;
  for (const auto& t : b.tagged) {
    Mention m{"m" + std::to_string(mentions.size() + 1), doc_id, t.span, t.type};
    auto it = entity_index.find(t.entity);
    if (it == entity_index.end()) {
      entity_index.emplace(t.entity, entities.size());
      entities.push_back(Entity{"e" + std::to_string(entities.size() + 1), doc_id, t.type, {m.mention_id}, ""});
    } else {
      entities[it->second].mentions.push_back(m.mention_id);
    }
    mentions.push_back(std::move(m));
  }
  std::vector<RelationTuple> relations;
  std::vector<std::size_t> evidence;
  std::vector<Prompt> prompts;
  std::vector<std::size_t> hard;
  for (const auto& p : planned) {
    RelationTuple r;
    r.doc_id = doc_id;
    r.intervention = entities[entity_index.at(p.intervention)].entity_id;
    if (!p.comparator.empty()) r.comparator = entities[entity_index.at(p.comparator)].entity_id;
    r.outcome = entities[entity_index.at(p.outcome)].entity_id;
    r.direction = p.direction;
    r.evidence_sentence = p.sentence;
    if (p.hard) hard.push_back(relations.size());
    relations.push_back(r);
    evidence.push_back(p.sentence);
    const auto [cs, ce] = sentence_chars(doc, p.sentence);
    prompts.push_back(Prompt{doc_id, prompt_text.at(p.intervention),
                             p.comparator.empty() ? "" : prompt_text.at(p.comparator), prompt_text.at(p.outcome),
                             p.direction, cs, ce});
  }
  std::sort(evidence.begin(), evidence.end());
  evidence.erase(std::unique(evidence.begin(), evidence.end()), evidence.end());
  AnnotatedDocument annotated = AnnotatedDocument::create(std::move(doc), std::move(mentions), std::move(entities),
                                                          std::move(evidence), std::move(relations));
  return SynthDocument{std::move(annotated), std::move(prompts), std::move(hard)};
}

template <typename T>
std::vector<T> sample_distinct(const std::vector<T>& pool, std::size_t n, Rng& rng) {
  std::vector<T> copy = pool;
  rng.shuffle(copy);
  copy.resize(std::min(n, copy.size()));
  return copy;
}

// Leading entries of `pool`, or all of it when reserved names are allowed.
std::vector<std::string> lexicon(const std::vector<std::string>& pool, double held_out, bool unseen) {
  if (unseen) return pool;
  const auto keep = static_cast<std::size_t>(std::llround(static_cast<double>(pool.size()) * (1.0 - held_out)));
  return {pool.begin(), pool.begin() + static_cast<long>(std::clamp<std::size_t>(keep, 1, pool.size()))};
}

Direction random_direction(Rng& rng) { return direction_at(rng.below(kNumDirections)); }

}  // namespace

SynthDocument synth_document(const std::string& doc_id, const SynthConfig& config, bool unseen_names) {
  if (config.held_out < 0.0 || config.held_out >= 1.0) throw InvalidArgument("synth held_out must lie in [0, 1)");
  Rng rng = Rng::for_document(config.seed, doc_id);
  DocBuilder b;
  std::map<std::string, std::string> prompt_text;

  const bool multi = rng.chance(config.multi_arm);
  const std::size_t arms = multi ? 2 : 1;
  std::vector<std::string> active;
  for (const auto& a : sample_distinct(lexicon(kDrugs, config.held_out, unseen_names), arms, rng)) active.push_back(a);
  if (!multi && rng.chance(0.15)) active[0] = rng.pick(kTherapies);
  const std::string comparator = rng.pick(kComparators);
  const std::string condition = rng.pick(kConditions);

  // Outcomes reported with a finding, plus possibly one never reported.
  const std::size_t n_outcomes = 1 + rng.below(3);
  std::vector<std::string> outcomes;
  for (const auto& o : sample_distinct(lexicon(kOutcomes, config.held_out, unseen_names), n_outcomes, rng)) outcomes.push_back(o);
  if (rng.chance(0.5)) outcomes[rng.below(outcomes.size())] = rng.pick(kAdverse);
  std::sort(outcomes.begin(), outcomes.end());
  outcomes.erase(std::unique(outcomes.begin(), outcomes.end()), outcomes.end());
  rng.shuffle(outcomes);

  auto piece = [](const std::string& text, const std::string& key, EntityType type) {
    return Piece{text, key, type};
  };
  auto arm_key = [](const std::string& a) { return "I:" + a; };
  const std::string comp_key = "C:" + comparator;
  prompt_text[comp_key] = comparator;
  for (const auto& a : active) prompt_text[arm_key(a)] = a;
  for (const auto& o : outcomes) prompt_text["O:" + o] = o;

  Slots base;
  base.values["{COND}"] = Piece{condition, "", EntityType::Intervention};
  base.values["{C}"] = piece(comparator, comp_key, EntityType::Intervention);
  base.values["{I}"] = piece(active[0], arm_key(active[0]), EntityType::Intervention);

  // Background.
  if (rng.chance(0.7)) b.add(rng.pick(kBackground), base);

  // Methods: first arm mention may carry a dose.
  {
    Slots s = base;
    const bool is_drug = std::find(kDrugs.begin(), kDrugs.end(), active[0]) != kDrugs.end();
    const std::string first = is_drug && rng.chance(0.5) ? dose_form(active[0], rng) : active[0];
    s.values["{I}"] = piece(first, arm_key(active[0]), EntityType::Intervention);
    s.values["{N}"] = Piece{std::to_string(40 + rng.below(400)), "", EntityType::Intervention};
    if (multi) {
      s.values["{I2}"] = piece(active[1], arm_key(active[1]), EntityType::Intervention);
      b.add("In this randomized trial , {N} patients with {COND} were assigned to {I} , {I2} or {C} .", s);
    } else if (rng.chance(0.5)) {
      b.add("In this randomized trial , {N} patients with {COND} were assigned to {I} or {C} .", s);
    } else {
      s.values["{W}"] = Piece{std::to_string(4 + rng.below(48)), "", EntityType::Intervention};
      b.add("Participants with {COND} received {I} or {C} for {W} weeks .", s);
    }
  }
  if (rng.chance(config.extraneous)) {
    Slots s = base;
    s.values["{X}"] = piece(rng.pick(kExtraneous), "X:extra", EntityType::Intervention);
    b.add(rng.chance(0.5) ? "All participants also received {X} ." : "Both groups received {X} throughout the study .", s);
  }
  {
    Slots s = base;
    s.values["{O}"] = piece(outcomes[0], "O:" + outcomes[0], EntityType::Outcome);
    b.add("The primary outcome was {O} .", s);
    if (outcomes.size() > 1) {
      s.values["{O2}"] = piece(outcomes[1], "O:" + outcomes[1], EntityType::Outcome);
      b.add("{O} and {O2} were also measured at baseline and at follow-up .", s);
    }
  }

  // Results.
  std::vector<PlannedRelation> planned;
  auto is_adverse = [](const std::string& o) {
    return std::find(kAdverse.begin(), kAdverse.end(), o) != kAdverse.end();
  };
  std::vector<std::pair<std::string, std::string>> findings;  // (arm, outcome)
  if (multi) {
    for (std::size_t k = 0; k < outcomes.size(); ++k) findings.emplace_back(active[k % 2], outcomes[k]);
    if (outcomes.size() == 1) findings.emplace_back(active[1], outcomes[0]);
  } else {
    for (const auto& o : outcomes) findings.emplace_back(active[0], o);
  }

  std::size_t f = 0;
  while (f < findings.size()) {
    const auto& [arm, outcome] = findings[f];
    Slots s = base;
    s.values["{I}"] = piece(arm, arm_key(arm), EntityType::Intervention);
    s.values["{O}"] = piece(outcome, "O:" + outcome, EntityType::Outcome);
    const Direction dir = random_direction(rng);
    // A shared no-difference sentence for two outcomes of one arm.
    if (!multi && dir == Direction::NoDifference && f + 1 < findings.size() && rng.chance(0.3)) {
      const std::string& second = findings[f + 1].second;
      s.values["{O2}"] = piece(second, "O:" + second, EntityType::Outcome);
      const std::size_t sent = b.add(rng.pick(kNoDiffPair), s);
      planned.push_back({arm_key(arm), comp_key, "O:" + outcome, dir, sent, false});
      planned.push_back({arm_key(arm), comp_key, "O:" + second, dir, sent, false});
      f += 2;
      continue;
    }
    bool hard = false;
    std::string pattern;
    if (multi) {
      pattern = rng.pick(dir == Direction::Increased   ? kArmIncreased
                         : dir == Direction::Decreased ? kArmDecreased
                                                       : kArmNoDiff);
    } else if (dir == Direction::Decreased && is_adverse(outcome) && rng.chance(config.hard_fraction)) {
      pattern = rng.pick(kInverted);
      hard = true;
    } else {
      pattern = rng.pick(dir == Direction::Increased   ? kIncreased
                         : dir == Direction::Decreased ? kDecreased
                                                       : kNoDiff);
    }
    const std::size_t sent = b.add(pattern, s);
    planned.push_back({arm_key(arm), comp_key, "O:" + outcome, dir, sent, hard});
    ++f;
  }

  if (rng.chance(0.3)) {
    Slots s = base;
    s.values["{O}"] = piece(outcomes[0], "O:" + outcomes[0], EntityType::Outcome);
    b.add("{O} was assessed by investigators blinded to allocation .", s);
  }
  b.add(rng.pick(kConclusion), base);
  return assemble(doc_id, b, planned, prompt_text);
}

SynthCorpus synth_corpus(const SynthConfig& config) {
  SynthCorpus corpus;
  auto fill = [&](SynthSplit& split, const std::string& name, std::size_t n, bool unseen) {
    for (std::size_t k = 0; k < n; ++k) {
      std::ostringstream id;
      id << name << '-' << std::setw(4) << std::setfill('0') << k;
      SynthDocument d = synth_document(id.str(), config, unseen);
      for (auto h : d.hard_relations) split.hard_cases.emplace_back(id.str(), h);
      split.prompts.insert(split.prompts.end(), d.prompts.begin(), d.prompts.end());
      split.docs.push_back(std::move(d.doc));
    }
  };
  fill(corpus.train, "train", config.train, false);
  fill(corpus.dev, "dev", config.dev, true);
  fill(corpus.test, "test", config.test, true);
  return corpus;
}

void write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const SynthSplit& split, const std::string& name) {
    write_corpus(split.docs, dir / (name + ".jsonl"));
    write_prompts(split.prompts, dir / (name + ".prompts.jsonl"));
    std::vector<std::string> lines;
    for (const auto& [doc, rel] : split.hard_cases) {
      lines.push_back(nlohmann::ordered_json{{"doc_id", doc}, {"relation", rel}}.dump());
    }
    jsonl::write_lines(lines, dir / (name + ".hard.jsonl"));
  };
  write(corpus.train, "train");
  write(corpus.dev, "dev");
  write(corpus.test, "test");
}

AnnotatedDocument erythromycin_example() {
  DocBuilder b;
  Slots s;
  s.values["{I}"] = Piece{"erythromycin 333 mg three times daily", "I", EntityType::Intervention};
  s.values["{C}"] = Piece{"identical placebo", "C", EntityType::Intervention};
  b.add("Pregnant women with bacterial vaginosis were randomized to {I} or {C} .", s);
  s.values["{O}"] = Piece{"low birth weight", "O1", EntityType::Outcome};
  s.values["{O2}"] = Piece{"preterm delivery", "O2", EntityType::Outcome};
  b.add("The main outcomes were {O} and {O2} .", s);
  s.values["{I}"] = Piece{"erythromycin", "I", EntityType::Intervention};
  const std::size_t ev = b.add(
      "{I} had little effect in reducing {O} ( 8 % vs 11 % , p = 0.4 ) or {O2} ( 13 % vs 15 % , p = 0.7 ) .", s);
  b.add("Routine screening is not supported by these results .", s);
  std::map<std::string, std::string> text{{"I", "erythromycin"}, {"C", "placebo"}, {"O1", "low birth weight"},
                                          {"O2", "preterm delivery"}};
  std::vector<PlannedRelation> planned{{"I", "C", "O1", Direction::NoDifference, ev, false},
                                       {"I", "C", "O2", Direction::NoDifference, ev, false}};
  return assemble("erythromycin-example", b, planned, text).doc;
}

}  // namespace eli
