#include "stgan/synthetic.hpp"

#include <array>
#include <cctype>
#include <map>
#include <random>
#include <sstream>
#include <string_view>

#include "stgan/corpus.hpp"

namespace stgan::corpus {

namespace {

using WordList = std::vector<std::string_view>;

const std::map<std::string_view, WordList>& slot_fillers() {
  static const std::map<std::string_view, WordList> fillers = {
      {"name", {"anna", "ben", "carl", "dora", "emma", "felix", "grace", "hugo", "iris", "jack",
                "kate", "leo", "mia", "nora", "omar", "paul", "rosa", "sam", "tara", "umar",
                "vera", "will", "xena", "yuri", "zoe", "alex", "bella", "chris", "diana", "eric"}},
      {"animal", {"dog", "cat", "horse", "rabbit", "goat", "duck", "parrot", "mouse", "fox", "owl",
                  "pig", "cow", "sheep", "hen", "turtle", "frog", "bear", "wolf", "deer", "lamb"}},
      {"object", {"book", "lamp", "ball", "kite", "box", "key", "map", "cup", "hat", "coat",
                  "bag", "bell", "clock", "drum", "flute", "ring", "vase", "jar", "chair", "bowl",
                  "bottle", "camera", "phone", "wallet", "letter", "ticket", "suitcase",
                  "umbrella", "pencil", "basket"}},
      {"place", {"park", "market", "garden", "library", "station", "kitchen", "river", "beach",
                 "forest", "harbor", "museum", "school", "office", "bakery", "farm", "village",
                 "castle", "bridge", "hotel", "airport", "church", "cafe", "theater", "square",
                 "tower"}},
      {"food", {"bread", "soup", "apples", "cake", "cheese", "rice", "fish", "pie", "tea",
                "coffee", "milk", "honey", "salad", "pasta", "plums", "pears", "eggs", "jam",
                "corn", "candy"}},
      {"color", {"red", "blue", "green", "yellow", "black", "white", "brown", "gray", "orange",
                 "pink", "purple", "golden"}},
      {"adj", {"cold", "warm", "bright", "dark", "quiet", "noisy", "strange", "lovely", "empty",
               "crowded", "clean", "dirty", "calm", "busy", "sunny", "windy", "grey", "pleasant",
               "gloomy", "peaceful"}},
  };
  return fillers;
}

// Every template of a script names all of the script's slots, so a sentence
// carries what its successor needs.
struct Script {
  std::vector<std::string_view> slots;
  std::vector<std::string_view> templates;
};

const std::vector<Script>& scripts() {
  static const std::vector<Script> all = {
      {{"name", "animal"},
       {"{name} has a {animal}.", "The {animal} follows {name}.",
        "{name} feeds the {animal} every morning.",
        "Every evening {name} walks the {animal} in the park.",
        "The {animal} sleeps next to {name}."}},
      {{"name", "friend", "object"},
       {"{name} gave {friend} a {object}.", "{friend} liked the {object} from {name}.",
        "{name} and {friend} looked at the {object} together.",
        "Later {friend} lost the {object} and {name} found it."}},
      {{"name", "food", "place"},
       {"{name} ate {food} at the {place}.",
        "The {food} at the {place} was good, said {name}.",
        "{name} bought more {food} in the {place}.", "{name} left the {place} with the {food}."}},
      {{"name", "place"},
       {"{name} went to the {place}.", "The {place} was very busy today, {name} said.",
        "{name} waited at the {place}.", "{name} stayed at the {place} until night.",
        "At last {name} left the {place}."}},
      {{"object", "color"},
       {"The {object} is {color}.", "Someone painted the {object} {color}.",
        "A {color} {object} stood by the door.", "Nobody wanted the {color} {object}.",
        "The {color} {object} was sold at noon."}},
      {{"place", "adj"},
       {"The {place} felt {adj}.", "It was a {adj} day at the {place}.",
        "People said the {place} looked {adj}.", "The {adj} {place} was quiet at night."}},
      {{"name", "object", "place"},
       {"{name} lost a {object} at the {place}.", "{name} looked for the {object} in the {place}.",
        "A guard at the {place} found the {object} for {name}.",
        "{name} took the {object} home from the {place}."}},
      {{"name", "friend"},
       {"{name} met {friend}.", "{friend} smiled at {name}.", "{name} and {friend} talked for hours.",
        "{friend} asked {name} a question.", "{name} and {friend} are good friends now."}},
      {{"animal", "food"},
       {"The {animal} ate the {food}.", "The {animal} wanted more {food}.",
        "Nobody gave the {animal} any {food} today.", "The {animal} likes {food} very much."}},
  };
  return all;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string fill(std::string_view tmpl, const std::map<std::string_view, std::string_view>& cast) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i);
      out += cast.at(tmpl.substr(i + 1, close - i - 1));
      i = close + 1;
    } else {
      out.push_back(tmpl[i++]);
    }
  }
  return capitalize(std::move(out));
}

std::string_view filler_list_name(std::string_view slot) { return slot == "friend" ? "name" : slot; }

}  // namespace

std::vector<std::string> synthetic_corpus(std::size_t sentences, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& all_scripts = scripts();
  const auto& fillers = slot_fillers();
  std::uniform_int_distribution<std::size_t> pick_script(0, all_scripts.size() - 1);
  std::vector<std::string> lines;
  std::size_t emitted = 0;
  while (emitted < sentences) {
    const Script& script = all_scripts[pick_script(rng)];
    std::map<std::string_view, std::string_view> cast;
    for (auto slot : script.slots) {
      const auto& words = fillers.at(filler_list_name(slot));
      std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
      std::string_view w;
      do {
        w = words[pick(rng)];
      } while (slot == "friend" && w == cast["name"]);
      cast[slot] = w;
    }
    if (!lines.empty()) lines.emplace_back();
    for (auto tmpl : script.templates) {
      if (emitted == sentences) break;
      lines.push_back(fill(tmpl, cast));
      ++emitted;
    }
  }
  return lines;
}

std::set<std::string> synthetic_lexicon() {
  std::set<std::string> words;
  for (const auto& [slot, list] : slot_fillers())
    for (auto w : list) words.emplace(w);
  for (const auto& script : scripts()) {
    for (auto tmpl : script.templates) {
      std::string stripped;
      for (std::size_t i = 0; i < tmpl.size();) {
        if (tmpl[i] == '{') {
          i = tmpl.find('}', i) + 1;
          stripped.push_back(' ');
        } else {
          stripped.push_back(tmpl[i++]);
        }
      }
      for (auto& t : tokenize(stripped)) words.insert(t);
    }
  }
  return words;
}

}  // namespace stgan::corpus
