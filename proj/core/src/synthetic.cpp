#include "celt/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

#include "celt/rng.hpp"
#include "celt/tokenizer.hpp"

namespace celt {

namespace {

// A fragment of a user utterance; `slot` is empty for plain words.
struct Piece {
  std::string text;
  std::string slot;
};

struct SlotDef {
  std::string name;
  bool numeric = false;  // bare answers are digits
};

struct Template {
  std::string text;  // {slot} placeholders
};

struct DomainDef {
  std::string name;
  std::vector<std::string> intents;
  std::vector<SlotDef> slots;
  // Opening templates per intent index.
  std::vector<std::vector<std::string>> openings;
};

const std::vector<std::string> kRestaurants = {
    "sakoon",     "olive garden", "blue door",  "taj palace", "golden wok",
    "casa mia",   "le petit",     "sushi zen",  "the grill",  "red lantern",
    "bombay house", "pasta bella", "cafe lumen", "green leaf", "ocean pearl",
    "spice route", "little italy", "noodle bar", "harbor fish", "mama rosa",
    "kyoto garden", "el toro",    "the nook",   "saffron",    "pho saigon",
    "bistro nine", "royal curry", "urban tavern", "maple table", "stone oven"};

const std::vector<std::string> kMovies = {
    "star quest",   "dark river",   "the long road", "moonfall",   "iron heart",
    "silent city",  "lost island",  "night owl",     "red planet", "frozen sky",
    "the heist",    "golden hour",  "wild storm",    "deep blue",  "last light",
    "paper moon",   "rising sun",   "shadow run",    "happy days", "big escape",
    "ghost town",   "blue velvet",  "sky high",      "fast lane",  "true north"};

const std::vector<std::string> kTheatres = {
    "regal",     "amc",       "cinemark",  "century", "odeon",
    "landmark",  "alamo",     "vue",       "rialto",  "majestic",
    "paramount", "starlight", "roxy",      "empire",  "orpheum"};

const std::vector<std::string> kDates = {
    "today",  "tomorrow", "monday",   "tuesday", "wednesday",
    "thursday", "friday", "saturday", "sunday",  "tonight"};

const std::vector<DomainDef>& domains() {
  static const std::vector<DomainDef> defs = {
      {"restaurant",
       {"find_restaurant", "reserve_restaurant"},
       {{"restaurant_name"}, {"num_people", true}, {"time", true}, {"date"}},
       {{"find me a restaurant for {date}",
         "is {restaurant_name} open {date}",
         "look for a place to eat at {time} pm",
         "find a restaurant for {num_people} people",
         "search for restaurants near me",
         "what restaurants are open {date}"},
        {"i want to book a table at {restaurant_name}",
         "book a table for {num_people} people",
         "reserve {restaurant_name} for {date}",
         "i need a table at {restaurant_name} for {num_people} people",
         "make a reservation at {restaurant_name} at {time} pm",
         "book me a table {date}"}}},
      {"movie",
       {"buy_movie_tickets", "find_movie"},
       {{"movie_name"}, {"theatre_name"}, {"num_tickets", true}, {"time", true}, {"date"}},
       {{"i want {num_tickets} tickets for {movie_name}",
         "buy tickets for {movie_name} at {theatre_name}",
         "get me tickets for {movie_name} {date}",
         "book {num_tickets} seats at {theatre_name}",
         "purchase tickets for {movie_name}",
         "i would like to buy movie tickets {date}"},
        {"what is playing at {theatre_name}",
         "find showtimes for {movie_name}",
         "when is {movie_name} showing {date}",
         "which movies are on at {time} pm",
         "show me movies playing {date}",
         "find a movie at {theatre_name}"}}},
  };
  return defs;
}

const std::map<std::string, std::vector<std::string>>& request_phrases() {
  static const std::map<std::string, std::vector<std::string>> phrases = {
      {"restaurant_name", {"which restaurant", "which place would you like"}},
      {"num_people", {"how many people", "for how many guests", "how many in your party"}},
      {"num_tickets", {"how many tickets", "how many seats do you need"}},
      {"time", {"what time", "at what time would you like", "which time works for you"}},
      {"date", {"which day", "what date would you like"}},
      {"movie_name", {"which movie", "what movie would you like to see"}},
      {"theatre_name", {"which theatre", "at which cinema"}},
  };
  return phrases;
}

const std::map<std::string, std::vector<std::string>>& explicit_answers() {
  static const std::map<std::string, std::vector<std::string>> phrases = {
      {"restaurant_name", {"at {v}", "i prefer {v}", "let us try {v}"}},
      {"num_people", {"for {v} people", "{v} people", "we are {v}"}},
      {"num_tickets", {"{v} tickets", "i need {v} tickets", "{v} seats please"}},
      {"time", {"at {v} pm", "{v} pm", "around {v} pm"}},
      {"date", {"on {v}", "for {v}", "{v} please"}},
      {"movie_name", {"i want to see {v}", "{v} please", "the movie {v}"}},
      {"theatre_name", {"at {v}", "{v} cinema", "i prefer {v}"}},
  };
  return phrases;
}

template <typename C>
const auto& pick(Rng& rng, const C& items) {
  return items[rng.below(items.size())];
}

std::string sample_value(const std::string& slot, Rng& rng) {
  if (slot == "restaurant_name") return pick(rng, kRestaurants);
  if (slot == "movie_name") return pick(rng, kMovies);
  if (slot == "theatre_name") return pick(rng, kTheatres);
  if (slot == "date") return pick(rng, kDates);
  if (slot == "time") return std::to_string(1 + rng.below(11));
  return std::to_string(2 + rng.below(8));  // counts
}

// Expands "{slot}" placeholders; the `{v}` placeholder stands for `slot`.
std::vector<Piece> expand(const std::string& pattern,
                          std::map<std::string, std::string>& values,
                          const std::string& value_slot, Rng& rng) {
  std::vector<Piece> pieces;
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    auto open = pattern.find('{', pos);
    if (open == std::string::npos) {
      pieces.push_back({pattern.substr(pos), ""});
      break;
    }
    if (open > pos) pieces.push_back({pattern.substr(pos, open - pos), ""});
    auto close = pattern.find('}', open);
    std::string name = pattern.substr(open + 1, close - open - 1);
    if (name == "v") name = value_slot;
    auto it = values.find(name);
    if (it == values.end()) it = values.emplace(name, sample_value(name, rng)).first;
    pieces.push_back({it->second, name});
    pos = close + 1;
  }
  return pieces;
}

Turn user_turn(const std::vector<Piece>& pieces, const std::string& intent,
               std::set<std::string> acts, bool labeled) {
  Turn turn;
  turn.speaker = Speaker::kUser;
  SemanticFrame frame;
  frame.intent = intent;
  frame.user_acts = std::move(acts);
  std::size_t word = 0;
  for (const auto& p : pieces) {
    const auto words = split_words(p.text);
    if (words.empty()) continue;
    for (const auto& w : words) {
      if (!turn.utterance.empty()) turn.utterance += ' ';
      turn.utterance += w;
    }
    if (!p.slot.empty()) frame.slots.push_back({p.slot, word, word + words.size()});
    word += words.size();
  }
  if (labeled) turn.labels = std::move(frame);
  return turn;
}

Turn system_turn(std::string utterance, std::vector<SystemAct> acts) {
  Turn turn;
  turn.speaker = Speaker::kSystem;
  turn.utterance = std::move(utterance);
  turn.system_acts = std::move(acts);
  return turn;
}

Dialogue generate_dialogue(Rng& rng, const SyntheticConfig& config,
                           std::string id) {
  const auto& domain = pick(rng, domains());
  const std::size_t intent_index = rng.below(domain.intents.size());
  const std::string& intent = domain.intents[intent_index];
  std::map<std::string, std::string> values;
  Dialogue d;
  d.id = std::move(id);

  // Opening.
  const bool greet = rng.bernoulli(0.3);
  std::vector<Piece> opening;
  if (greet) opening.push_back({rng.bernoulli(0.5) ? "hi" : "hello", ""});
  auto body = expand(pick(rng, domain.openings[intent_index]), values, "", rng);
  opening.insert(opening.end(), body.begin(), body.end());
  std::set<std::string> opening_acts{"inform"};
  if (greet) opening_acts.insert("greeting");
  d.turns.push_back(user_turn(opening, intent, opening_acts, config.labeled));

  // Slot requests, count slots first: those make bare answers ambiguous.
  std::vector<std::string> missing_numeric, missing_other;
  for (const auto& s : domain.slots) {
    if (values.count(s.name)) continue;
    (s.numeric ? missing_numeric : missing_other).push_back(s.name);
  }
  rng.shuffle(missing_numeric.begin(), missing_numeric.end());
  rng.shuffle(missing_other.begin(), missing_other.end());
  std::vector<std::string> to_request = missing_numeric;
  to_request.insert(to_request.end(), missing_other.begin(), missing_other.end());
  const std::size_t n_requests =
      std::min<std::size_t>(to_request.size(), 1 + rng.below(2));

  for (std::size_t r = 0; r < n_requests; ++r) {
    const std::string& slot = to_request[r];
    d.turns.push_back(system_turn(pick(rng, request_phrases().at(slot)),
                                  {{"request", slot}}));
    std::vector<Piece> answer;
    if (rng.bernoulli(config.bare_answer_probability)) {
      answer = expand("{v}", values, slot, rng);
    } else {
      answer = expand(pick(rng, explicit_answers().at(slot)), values, slot, rng);
    }
    d.turns.push_back(user_turn(answer, intent, {"inform"}, config.labeled));
  }

  if (rng.bernoulli(config.confirm_probability) && !values.empty()) {
    // Confirm one known slot.
    auto it = values.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(rng.below(values.size())));
    d.turns.push_back(system_turn("please confirm " + it->second + " is that right",
                                  {{"confirm", it->first}}));
    if (rng.bernoulli(0.7)) {
      d.turns.push_back(user_turn({{rng.bernoulli(0.5) ? "yes" : "yes that is right", ""}},
                                  intent, {"affirm"}, config.labeled));
    } else {
      d.turns.push_back(user_turn({{rng.bernoulli(0.5) ? "no" : "no that is wrong", ""}},
                                  intent, {"negate"}, config.labeled));
    }
  }

  if (rng.bernoulli(config.closing_probability)) {
    d.turns.push_back(system_turn("done is there anything else",
                                  {{"notify_success", std::nullopt},
                                   {"reqmore", std::nullopt}}));
    switch (rng.below(3)) {
      case 0:
        d.turns.push_back(user_turn({{"no thanks", ""}}, intent,
                                    {"negate", "thank_you"}, config.labeled));
        break;
      case 1:
        d.turns.push_back(user_turn({{"thank you bye", ""}}, intent,
                                    {"thank_you", "good_bye"}, config.labeled));
        break;
      default:
        d.turns.push_back(user_turn({{"that is all", ""}}, intent, {"negate"},
                                    config.labeled));
        break;
    }
  }
  return d;
}

}  // namespace

Corpus generate_synthetic_corpus(std::uint64_t seed, const SyntheticConfig& config) {
  Rng rng(seed);
  Corpus corpus;
  for (std::size_t i = 0; i < config.dialogues; ++i) {
    corpus.dialogues.push_back(
        generate_dialogue(rng, config, config.id_prefix + "-" + std::to_string(i)));
  }
  corpus.labels = collect_labels(corpus.dialogues);
  return corpus;
}

bool is_context_ambiguous(const Dialogue& dialogue, std::size_t turn_index) {
  const Turn& turn = dialogue.turns.at(turn_index);
  if (turn.speaker != Speaker::kUser) return false;
  const auto words = split_words(turn.utterance);
  if (words.size() != 1) return false;
  return std::all_of(words[0].begin(), words[0].end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

std::size_t count_context_ambiguous(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& d : corpus.dialogues)
    for (std::size_t i = 0; i < d.turns.size(); ++i) n += is_context_ambiguous(d, i);
  return n;
}

std::vector<std::vector<std::string>> generate_plain_text(std::uint64_t seed,
                                                          std::size_t documents) {
  static const std::vector<std::string> subjects = {
      "we", "my friends", "the family", "our team", "she", "he", "they", "i"};
  static const std::vector<std::string> sentence_templates = {
      "{s} went to {r} {d}",
      "{s} had dinner at {r} with {n} people",
      "{s} watched {m} at {t} {d}",
      "the show at {t} pm was sold out",
      "{s} bought {n} tickets for {m}",
      "{r} is a nice place to eat",
      "{m} is playing at the {c} theatre",
      "{s} met at {t} pm near {c}",
      "the table for {n} was ready at {t}",
      "{s} will travel {d} to see {m}",
      "{s} reserved a table at {r} for {d}",
      "the weather was warm {d}",
      "{s} like to cook dinner at home",
      "the {c} cinema opens at {t} am"};
  Rng rng(seed);
  std::vector<std::vector<std::string>> docs;
  for (std::size_t i = 0; i < documents; ++i) {
    std::vector<std::string> doc;
    const std::size_t len = 3 + rng.below(4);
    for (std::size_t k = 0; k < len; ++k) {
      const std::string& tmpl = pick(rng, sentence_templates);
      std::string out;
      for (std::size_t p = 0; p < tmpl.size(); ++p) {
        if (tmpl[p] == '{' && p + 2 < tmpl.size() && tmpl[p + 2] == '}') {
          switch (tmpl[p + 1]) {
            case 's': out += pick(rng, subjects); break;
            case 'r': out += pick(rng, kRestaurants); break;
            case 'm': out += pick(rng, kMovies); break;
            case 'c': out += pick(rng, kTheatres); break;
            case 'd': out += pick(rng, kDates); break;
            case 't': out += std::to_string(1 + rng.below(11)); break;
            case 'n': out += std::to_string(2 + rng.below(8)); break;
          }
          p += 2;
        } else {
          out += tmpl[p];
        }
      }
      doc.push_back(std::move(out));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace celt
