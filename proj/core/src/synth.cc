#include "triage/synth.h"

#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>

#include "triage/error.h"
#include "triage/rng.h"

namespace triage {

const OracleEntry* OracleKey::find(const std::string& id) const {
  const auto it = entries.find(id);
  return it == entries.end() ? nullptr : &it->second;
}

void to_json(nlohmann::json& j, const OracleKey& k) {
  j = nlohmann::json::object();
  for (const auto& [id, e] : k.entries) {
    nlohmann::json row{{"label", to_string(e.label)}, {"category", e.category}};
    if (e.signal_span) row["signal_span"] = *e.signal_span;
    j[id] = row;
  }
}

void from_json(const nlohmann::json& j, OracleKey& k) {
  k.entries.clear();
  for (const auto& [id, row] : j.items()) {
    OracleEntry e;
    e.label = parse_label(row.at("label").get<std::string>());
    e.category = row.at("category").get<std::string>();
    if (row.contains("signal_span")) e.signal_span = row.at("signal_span").get<std::string>();
    k.entries.emplace(id, std::move(e));
  }
}

void write_oracle_key(const std::filesystem::path& path, const OracleKey& key) {
  write_json(path, nlohmann::json{{"sealed", true}, {"entries", key}});
  std::filesystem::permissions(path, std::filesystem::perms::owner_read |
                                         std::filesystem::perms::owner_write);
}

OracleKey read_oracle_key(const std::filesystem::path& path) {
  return read_json(path).at("entries").get<OracleKey>();
}

void CorpusSpec::validate() const {
  for (const PoolMix* m : {&focused, &deployment}) {
    if (!(m->positive > 0.0 && m->positive < 1.0)) {
      fail(ErrorCode::kConfig, "pool prevalence must lie in (0,1)");
    }
    if (m->keyword_negative < 0.0 || m->positive + m->keyword_negative >= 1.0) {
      fail(ErrorCode::kConfig, "positive + keyword-negative share must stay below 1");
    }
    if (m->lookalike < 0.0 || m->reaction < 0.0 || m->lookalike + m->reaction > 1.0) {
      fail(ErrorCode::kConfig, "lookalike and reaction shares must lie in [0,1] together");
    }
  }
  if (off_list_share < 0.0 || off_list_share > 1.0) {
    fail(ErrorCode::kConfig, "off_list_share must lie in [0,1]");
  }
  double total = 0.0;
  for (const auto& [name, share] : confuser_shares) {
    if (share < 0.0) fail(ErrorCode::kConfig, "negative confuser share for " + name);
    total += share;
  }
  if (total <= 0.0) fail(ErrorCode::kConfig, "confuser shares sum to zero");
}

namespace {

nlohmann::json mix_json(const PoolMix& m) {
  return {{"positive", m.positive}, {"keyword_negative", m.keyword_negative},
          {"lookalike", m.lookalike}, {"reaction", m.reaction}};
}

PoolMix parse_mix(const nlohmann::json& j, PoolMix m) {
  m.positive = j.value("positive", m.positive);
  m.keyword_negative = j.value("keyword_negative", m.keyword_negative);
  m.lookalike = j.value("lookalike", m.lookalike);
  m.reaction = j.value("reaction", m.reaction);
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const CorpusSpec& s) {
  j = nlohmann::json{{"n_focused", s.n_focused},
                     {"n_deployment", s.n_deployment},
                     {"focused", mix_json(s.focused)},
                     {"deployment", mix_json(s.deployment)},
                     {"off_list_share", s.off_list_share},
                     {"confuser_shares", s.confuser_shares},
                     {"seed", s.seed},
                     {"template_pack", s.template_pack}};
}

void from_json(const nlohmann::json& j, CorpusSpec& s) {
  s = CorpusSpec{};
  s.n_focused = j.value("n_focused", s.n_focused);
  s.n_deployment = j.value("n_deployment", s.n_deployment);
  if (j.contains("focused")) s.focused = parse_mix(j.at("focused"), s.focused);
  if (j.contains("deployment")) s.deployment = parse_mix(j.at("deployment"), s.deployment);
  s.off_list_share = j.value("off_list_share", s.off_list_share);
  if (j.contains("confuser_shares")) {
    s.confuser_shares = j.at("confuser_shares").get<std::map<std::string, double>>();
  }
  s.seed = j.value("seed", s.seed);
  s.template_pack = j.value("template_pack", s.template_pack);
}

namespace {

template <size_t N>
using Words = std::array<const char*, N>;

constexpr Words<24> kSymptoms = {
    "fever", "rash", "swelling", "vomiting", "headache", "lethargy", "myalgia",
    "chest pain", "palpitations", "sore arm", "redness and heat", "hives",
    "facial swelling", "sob", "dizziness", "syncopal episode", "diarrhoea",
    "abdominal pain", "irritable and crying", "arm swelling", "swollen glands",
    "tingling in arm", "febrile convulsion", "nausea"};

constexpr Words<18> kVaccines = {
    "flu vaccine", "covid vaccine", "pfizer vaccine", "moderna booster",
    "astrazeneca", "mmr", "dtpa", "hpv vaccine", "rotavirus vaccine",
    "meningococcal vaccine", "tetanus vaccine", "boostrix", "chicken pox vaccine",
    "4 month immunisations", "12 month vaccinations", "covid vax",
    "pneumococcal vaccine", "shingrix"};

constexpr Words<6> kOffListVaccines = {"flu shot", "covid jab", "booster shot",
                                       "tetanus shot", "flu jab", "covid shot"};

constexpr Words<10> kTimings = {"1/7", "2/7", "3/7", "this morning", "yesterday",
                                "2 days ago", "last night", "today", "1/52", "4 hours"};

constexpr Words<20> kComplaints = {
    "fall from ladder", "laceration to finger", "chest pain", "fever and cough",
    "rash on legs", "abdominal pain", "headache", "vomiting and diarrhoea",
    "sore throat", "back pain", "sob on exertion", "dizziness", "ankle injury",
    "swelling to knee", "palpitations", "urinary symptoms", "lethargy", "syncope",
    "epistaxis", "facial swelling"};

constexpr Words<10> kContext = {
    "obs stable", "pmhx asthma", "afebrile on arrival", "gcs 15", "nil allergies",
    "taking panadol", "ambulant", "pmhx t2dm", "mother concerned", "nil other sx"};

constexpr Words<6> kDurations = {"for 2/7", "since yesterday", "for 1/52", "today",
                                 "for 3 days", "overnight"};

constexpr Words<8> kStatus = {
    "immunisations up to date", "vaccinations utd", "fully vaccinated", "vax utd",
    "immunised", "vaccination status unknown", "fully vaxed", "covid vaccinated"};

constexpr Words<6> kAnimals = {"campyvax", "cattle vaccine", "sheep vaccine",
                               "pig vaccine", "poultry vaccine", "5 in 1 vaccine for calves"};

constexpr Words<5> kLookalikes = {"had tequila shot", "mounjaro injection",
                                  "steroid injection", "insulin injection", "b12 shot"};

constexpr Words<30> kTriggers = {
    "amoxicillin", "penicillin", "augmentin", "cephalexin", "ibuprofen", "nurofen",
    "codeine", "tramadol", "contrast dye", "bee sting", "wasp sting", "peanuts",
    "prawns", "shellfish", "new soap", "hair dye", "ant bites", "latex gloves",
    "metformin", "ace inhibitor", "blood transfusion", "iron infusion", "chemo",
    "morphine", "sunscreen", "cat scratch", "spider bite", "eating sushi",
    "new washing powder", "tattoo"};

constexpr Words<4> kSites = {"site-a", "site-b", "site-c", "site-d"};

struct Note {
  std::string text;
  Label label = Label::kNegative;
  std::string category;
  std::optional<std::string> span;
};

class NoteWriter {
 public:
  explicit NoteWriter(Rng& rng) : rng_(rng) {}

  Note positive(bool off_list) {
    const std::string vaccine = off_list ? pick(kOffListVaccines) : pick(kVaccines);
    const std::string symptom = pick(kSymptoms);
    const std::string when = pick(kTimings);
    Note n;
    n.label = Label::kPositive;
    n.category = off_list ? kCatAefiOffList : kCatAefi;
    switch (rng_.below(5)) {
      case 0:
        n.span = "post " + vaccine;
        n.text = symptom + " " + when + " " + *n.span;
        break;
      case 1:
        n.span = "had " + vaccine + " " + when;
        n.text = *n.span + ", now " + symptom;
        break;
      case 2:
        n.span = "since " + vaccine + " " + when;
        n.text = symptom + " and " + pick(kSymptoms) + " " + *n.span;
        break;
      case 3:
        n.span = "following " + vaccine;
        n.text = symptom + " " + *n.span + " " + when;
        break;
      default:
        n.span = "reaction to " + vaccine;
        n.text = "? " + *n.span + " " + when + ": " + symptom;
        break;
    }
    maybe_context(n.text);
    return n;
  }

  Note keyword_negative(const std::string& category) {
    Note n;
    n.category = category;
    const std::string complaint = pick(kComplaints);
    if (category == kCatStatus) {
      n.text = complaint + " " + pick(kDurations) + ". " + pick(kStatus);
    } else if (category == kCatHistory) {
      switch (rng_.below(4)) {
        case 0: n.text = complaint + ", due for " + pick(kVaccines) + " next week"; break;
        case 1: n.text = complaint + " " + pick(kDurations) + ", had " + pick(kVaccines) + " 3 years ago"; break;
        case 2: n.text = complaint + ", parents declined " + pick(kVaccines); break;
        default: n.text = complaint + " " + pick(kDurations) + ", no recent " + pick(kVaccines); break;
      }
    } else if (category == kCatAnimal) {
      n.text = "self injected with " + pick(kAnimals) + " while vaccinating stock, " +
               (rng_.bernoulli(0.5) ? "puncture to thumb" : "pain to hand");
    } else if (category == kCatVacuum) {
      n.text = rng_.bernoulli(0.5) ? complaint + " while vaccuming"
                                   : "tripped over vaccum cord, " + complaint;
    } else {
      n.text = rng_.bernoulli(0.5) ? "dog bite to hand, requesting rabies vaccine"
                                   : complaint + ", here for tetanus vaccine";
    }
    maybe_context(n.text);
    return n;
  }

  Note reaction() {
    Note n;
    n.category = kCatReaction;
    const std::string trigger = pick(kTriggers);
    const std::string symptom = pick(kSymptoms);
    const std::string when = pick(kTimings);
    switch (rng_.below(5)) {
      case 0: n.text = symptom + " " + when + " post " + trigger; break;
      case 1: n.text = "had " + trigger + " " + when + ", now " + symptom; break;
      case 2: n.text = symptom + " and " + pick(kSymptoms) + " since " + trigger + " " + when; break;
      case 3: n.text = symptom + " following " + trigger + " " + when; break;
      default: n.text = "? reaction to " + trigger + " " + when + ": " + symptom; break;
    }
    maybe_context(n.text);
    return n;
  }

  Note keyword_free(bool lookalike) {
    Note n;
    if (lookalike) {
      n.category = kCatLookalike;
      n.text = pick(kSymptoms) + " " + pick(kTimings) + " after " + pick(kLookalikes);
    } else {
      n.category = kCatKeywordFree;
      n.text = rng_.bernoulli(0.5) ? pick(kComplaints) + " " + pick(kDurations)
                                   : pick(kSymptoms) + " " + pick(kTimings) + " " +
                                         pick(kDurations);
    }
    maybe_context(n.text);
    return n;
  }

 private:
  template <size_t N>
  std::string pick(const Words<N>& words) {
    return words[rng_.below(N)];
  }

  void maybe_context(std::string& text) {
    if (rng_.bernoulli(0.5)) text += ". " + pick(kContext);
  }

  Rng& rng_;
};

std::string pick_confuser(Rng& rng, const std::map<std::string, double>& shares) {
  double total = 0.0;
  for (const auto& [name, share] : shares) total += share;
  double u = rng.uniform() * total;
  for (const auto& [name, share] : shares) {
    if (u < share) return name;
    u -= share;
  }
  return shares.rbegin()->first;
}

void generate_pool(const CorpusSpec& spec, const PoolMix& mix, Pool pool, size_t n,
                   const char* prefix, uint64_t salt, SyntheticCorpus& out) {
  Rng rng(spec.seed ^ salt);
  NoteWriter writer(rng);
  auto& records = pool == Pool::kFocused ? out.focused : out.deployment;
  auto& counts = out.category_counts[std::string(to_string(pool))];
  records.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    Note note;
    if (u < mix.positive) {
      note = writer.positive(rng.bernoulli(spec.off_list_share));
    } else if (u < mix.positive + mix.keyword_negative) {
      note = writer.keyword_negative(pick_confuser(rng, spec.confuser_shares));
    } else {
      const double v = rng.uniform();
      note = v < mix.reaction ? writer.reaction()
                              : writer.keyword_free(v < mix.reaction + mix.lookalike);
    }
    TriageRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "%s%06zu", prefix, i + 1);
    r.id = id;
    r.raw_text = note.text;
    if (rng.bernoulli(0.5)) r.raw_text[0] = static_cast<char>(std::toupper(r.raw_text[0]));
    if (rng.bernoulli(0.97)) r.age = static_cast<int>(rng.below(90));
    const auto sex = rng.below(20);
    r.sex = sex == 0 ? Sex::kUnknown : sex % 2 == 0 ? Sex::kFemale : Sex::kMale;
    r.site = kSites[rng.below(kSites.size())];
    char ts[32];
    std::snprintf(ts, sizeof ts, "2021-%02d-%02dT%02d:00:00Z", static_cast<int>(rng.below(12)) + 1,
                  static_cast<int>(rng.below(28)) + 1, static_cast<int>(rng.below(24)));
    r.timestamp = ts;
    r.pool = pool;
    out.key.entries[r.id] = OracleEntry{note.label, note.category, note.span};
    ++counts[note.category];
    records.push_back(std::move(r));
  }
}

}  // namespace

SyntheticCorpus generate(const CorpusSpec& spec) {
  spec.validate();
  SyntheticCorpus out;
  generate_pool(spec, spec.focused, Pool::kFocused, spec.n_focused, "F", 0x5f0c05edULL, out);
  generate_pool(spec, spec.deployment, Pool::kDeployment, spec.n_deployment, "D",
                0xde910e4dULL, out);
  return out;
}

}  // namespace triage
