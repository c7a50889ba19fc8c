#include "storyend/corpus/synthetic.hpp"

#include <array>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "storyend/common/rng.hpp"

namespace storyend::corpus {

namespace {

using Words = std::vector<std::string_view>;

struct Person {
  std::string_view name;
  bool female;
};

struct Topic {
  std::string_view title;
  Words things;      // noun phrases without article
  Words places;
  Words goals;       // verb phrases: "bake a cake"
  Words problems;    // clauses: "the oven stopped working"
  Words fixes;       // verb phrases in past tense
  Words outcomes;    // endings, see expand()
};

const std::array<Person, 40> kPeople = {{
    {"Dan", false},   {"Amy", true},    {"Nick", false},  {"Sara", true},   {"Tom", false},
    {"Lucy", true},   {"Mike", false},  {"Kate", true},   {"Joe", false},   {"Anna", true},
    {"Carl", false},  {"Gina", true},   {"Paul", false},  {"Rita", true},   {"Sam", false},
    {"Jill", true},   {"Greg", false},  {"Tina", true},   {"Ben", false},   {"Nora", true},
    {"Fred", false},  {"Ivy", true},    {"Hank", false},  {"Jenna", true},  {"Kyle", false},
    {"Lena", true},   {"Omar", false},  {"Maya", true},   {"Raj", false},   {"Zoe", true},
    {"Luis", false},  {"Beth", true},   {"Eli", false},   {"Cora", true},   {"Ivan", false},
    {"Dora", true},   {"Owen", false},  {"Faye", true},   {"Neil", false},  {"Hope", true},
}};

const Words kRelatives = {"mother", "father", "sister", "brother", "grandmother", "uncle", "aunt",
                          "cousin", "best friend", "neighbor", "roommate", "coworker"};
const Words kTimes = {"One morning", "Last summer", "On Saturday", "Yesterday", "Early one day", "Last week",
                      "One evening", "During the holidays", "On a rainy day", "Last month"};
const Words kFeelings = {"nervous", "excited", "anxious", "curious", "determined", "worried", "hopeful",
                         "impatient", "eager", "restless"};

const std::vector<Topic> kTopics = {
    {"Baking Day",
     {"chocolate cake", "apple pie", "banana bread", "lemon tart", "batch of cookies", "pumpkin muffin"},
     {"kitchen", "bakery", "farmers market"},
     {"bake a {thing}", "make a {thing} from scratch", "try a new recipe for a {thing}"},
     {"the oven stopped heating", "{pron} ran out of sugar", "the dough would not rise", "the smoke alarm went off"},
     {"borrowed flour from the neighbor", "followed an old family recipe", "turned the heat down carefully"},
     {"The {thing} tasted better than any store bought treat.", "Everybody asked for a second slice.",
      "{Name} entered the recipe in the county fair and won a ribbon.", "Grease covered every counter afterwards.",
      "Flour dust settled over the whole apartment."}},
    {"Game Day",
     {"soccer ball", "tennis racket", "pair of running shoes", "basketball", "skateboard", "bicycle helmet"},
     {"park", "gym", "court", "stadium", "track"},
     {"join the local team", "win the championship", "run a marathon", "learn to skate"},
     {"{pron} twisted an ankle", "rain flooded the field", "the coach benched {obj}", "{pron} kept missing shots"},
     {"practiced every afternoon", "hired a personal trainer", "stretched before each game"},
     {"{Name} scored the winning goal in overtime.", "Teammates lifted {obj} onto their shoulders.",
      "Bruised knees became a badge of honor.", "Victory tasted sweeter than lemonade.",
      "Trophies now line a shelf above {poss} bed."}},
    {"The Exam",
     {"chemistry exam", "history essay", "science project", "math quiz", "spelling test", "book report"},
     {"library", "classroom", "study hall"},
     {"ace the {thing}", "finish the {thing} early", "impress {poss} teacher"},
     {"{pron} lost {poss} notes", "the printer jammed", "{pron} overslept", "the laptop crashed"},
     {"studied late with flash cards", "asked a tutor for help", "rewrote everything by hand"},
     {"A perfect grade appeared on the report card.", "Mrs. Porter hung the paper on the wall.",
      "{Name} earned a scholarship months later.", "Nobody failed, thanks to shared study guides.",
      "Graduation felt closer than ever."}},
    {"New Pet",
     {"puppy", "kitten", "hamster", "parrot", "goldfish", "rabbit", "turtle"},
     {"shelter", "pet store", "vet clinic"},
     {"adopt a {thing}", "train {poss} {thing}", "find a home for a stray {thing}"},
     {"the {thing} chewed the couch", "the {thing} escaped from the yard", "{poss} landlord banned animals"},
     {"bought a sturdy crate", "built a fence around the yard", "signed up for obedience classes"},
     {"Fluffy paws now greet {obj} at the door.", "The {thing} sleeps curled beside {obj} nightly.",
      "Neighbors often stop by to pet it.", "Vet bills turned out surprisingly cheap.",
      "A tiny collar with a bell jingles through the hallway."}},
    {"Road Trip",
     {"camping trip", "beach vacation", "train ride", "road trip", "ski weekend", "cruise"},
     {"airport", "mountains", "lake", "coast", "national park"},
     {"plan a {thing}", "save money for a {thing}", "surprise {poss} family with a {thing}"},
     {"the car broke down", "a storm cancelled the flight", "{pron} forgot the tent", "the hotel lost the booking"},
     {"called a tow truck", "rebooked for the next morning", "slept under the stars instead"},
     {"Postcards from that journey still decorate the fridge.", "Sunburned but grinning, everyone drove home.",
      "Photos of sunsets filled three albums.", "{Name} already booked another adventure for spring.",
      "Souvenir magnets crowded every kitchen cabinet."}},
    {"The Interview",
     {"job interview", "sales presentation", "quarterly report", "promotion review", "client meeting"},
     {"office", "warehouse", "conference room", "headquarters"},
     {"land a better job", "get promoted", "nail the {thing}", "impress {poss} new boss"},
     {"{poss} tie got stained", "the projector failed", "traffic made {obj} late", "{pron} forgot the slides"},
     {"rehearsed in front of a mirror", "printed spare copies", "left home two hours early"},
     {"HR called with an offer that afternoon.", "A corner office with a view came next.",
      "{Name} bought celebratory donuts for coworkers.", "Raises were announced across the department.",
      "Management praised the pitch in a company email."}},
    {"Shopping Spree",
     {"leather jacket", "laptop", "necklace", "sofa", "guitar", "wristwatch", "winter coat"},
     {"mall", "thrift shop", "electronics store", "flea market"},
     {"buy a new {thing}", "find a cheap {thing}", "replace {poss} old {thing}"},
     {"the store sold out", "{poss} card was declined", "the {thing} arrived broken", "prices doubled overnight"},
     {"waited for a holiday sale", "compared prices online", "traded in an old model"},
     {"Wearing it made {obj} feel like royalty.", "Receipts went straight into a drawer, regrets included.",
      "Compliments poured in from strangers.", "Budgeting suddenly became a serious hobby.",
      "That purchase lasted for many years."}},
    {"Party Time",
     {"birthday party", "wedding", "picnic", "family reunion", "sleepover", "graduation dinner"},
     {"backyard", "restaurant", "community hall", "rooftop"},
     {"host a {thing}", "plan a surprise {thing}", "organize a {thing} for {poss} {relative}"},
     {"the caterer cancelled", "it started to pour", "half the guests got lost", "the cake slid off the table"},
     {"ordered pizza instead", "rented a big tent", "sent directions to everyone"},
     {"Guests danced until midnight.", "Laughter echoed long after the music stopped.",
      "{Poss} {relative} called it unforgettable.", "Balloons drifted across the neighborhood sky.",
      "Leftovers fed the family for days."}},
};

const Words kSentence1 = {"{Name} wanted to {goal}.", "{Time}, {name} decided to {goal}.",
                          "{Name} had always dreamed to {goal}.", "{Name}'s {relative} suggested {pron} {goal}."};
const Words kSentence2 = {"{Pron} went to the {place} to get ready.", "{Pron} felt {feeling} about it.",
                          "{Pron} spent weeks preparing at the {place}.",
                          "{Pron} asked {poss} {relative} for advice."};
const Words kSentence3 = {"Unfortunately, {problem}.", "Then {problem}.", "Halfway through, {problem}.",
                          "Just before the big day, {problem}."};
const Words kSentence4 = {"{Name} {fix}.", "So {pron} {fix}.", "Undeterred, {name} {fix}.",
                          "With help from {poss} {relative}, {pron} {fix}."};

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

class StoryWriter {
 public:
  explicit StoryWriter(std::uint64_t seed) : rng_(seed) {}

  std::string_view pick(const Words& words) { return words[rng_.below(words.size())]; }
  template <typename T, std::size_t N>
  const T& pick(const std::array<T, N>& items) {
    return items[rng_.below(N)];
  }
  std::uint64_t raw() { return rng_.next(); }

  Story write(std::size_t index) {
    const Topic& topic = kTopics[rng_.below(kTopics.size())];
    person_ = pick(kPeople);
    thing_ = pick(topic.things);
    place_ = pick(topic.places);
    relative_ = pick(kRelatives);

    Story story;
    story.id = make_id();
    story.title = fmt::format("{} {}", topic.title, index + 1);
    goal_ = expand(pick(topic.goals));
    story.sentences[0] = capitalize(expand(pick(kSentence1)));
    story.sentences[1] = capitalize(expand(pick(kSentence2)));
    problem_ = expand(pick(topic.problems));
    story.sentences[2] = capitalize(expand(pick(kSentence3)));
    fix_ = expand(pick(topic.fixes));
    story.sentences[3] = capitalize(expand(pick(kSentence4)));
    story.sentences[4] = capitalize(expand(pick(topic.outcomes)));
    return story;
  }

 private:
  std::string make_id() {
    const std::uint64_t a = rng_.next();
    const std::uint64_t b = rng_.next();
    return fmt::format("{:08x}-{:04x}-4{:03x}-{:04x}-{:012x}", a >> 32, (a >> 16) & 0xFFFF, a & 0xFFF,
                       0x8000 | ((b >> 48) & 0x3FFF), b & 0xFFFFFFFFFFFFULL);
  }

  std::string expand(std::string_view pattern) {
    std::string out;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      if (pattern[i] != '{') {
        out.push_back(pattern[i]);
        continue;
      }
      const auto close = pattern.find('}', i);
      const auto slot = pattern.substr(i + 1, close - i - 1);
      i = close;
      out += fill(slot);
    }
    return out;
  }

  std::string fill(std::string_view slot) {
    const bool f = person_.female;
    if (slot == "Name" || slot == "name") return std::string(person_.name);
    if (slot == "pron") return f ? "she" : "he";
    if (slot == "Pron") return f ? "She" : "He";
    if (slot == "poss") return f ? "her" : "his";
    if (slot == "Poss") return f ? "Her" : "His";
    if (slot == "obj") return f ? "her" : "him";
    if (slot == "thing") return std::string(thing_);
    if (slot == "place") return std::string(place_);
    if (slot == "relative") return std::string(relative_);
    if (slot == "goal") return goal_;
    if (slot == "problem") return problem_;
    if (slot == "fix") return fix_;
    if (slot == "Time") return std::string(pick(kTimes));
    if (slot == "feeling") return std::string(pick(kFeelings));
    return "{" + std::string(slot) + "}";
  }

  SplitMix64 rng_;
  Person person_{};
  std::string_view thing_;
  std::string_view place_;
  std::string_view relative_;
  std::string goal_;
  std::string problem_;
  std::string fix_;
};

}  // namespace

Corpus synthesize_corpus(const SyntheticOptions& options) {
  Corpus corpus(fmt::format("synthetic:{}:{}", options.stories, options.seed));
  StoryWriter writer(options.seed);
  for (std::size_t i = 0; i < options.stories; ++i) {
    Story story = writer.write(i);
    while (corpus.contains(story.id)) story.id = fmt::format("{}-{}", story.id, writer.raw() & 0xFFFF);
    corpus.add(std::move(story));
  }
  return corpus;
}

}  // namespace storyend::corpus
