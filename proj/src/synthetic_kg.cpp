#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "concept_circuits/common.hpp"
#include "concept_circuits/concept_kb.hpp"

namespace cc {

namespace {

struct Domain {
  const char* name;
  bool abstract;
  std::vector<std::string> nouns;
  std::map<std::string, std::vector<std::string>> pools;  // relation -> object pool
};

const std::vector<std::string> kModifiers = {"wild",     "small",  "northern", "ancient", "golden", "silent",
                                             "hollow",   "bright", "eastern",  "dusty",   "royal",  "little",
                                             "southern", "mossy",  "crimson",  "gentle"};

const std::vector<Domain>& domains() {
  static const std::vector<Domain> table = {
      {"animal", false,
       {"fox", "otter", "heron", "badger", "lynx", "beetle", "sparrow", "salmon", "moose", "gecko", "owl", "hare",
        "bison", "falcon", "toad", "marten"},
       {{"IsA", {"animal", "creature", "living thing", "vertebrate"}},
        {"HasProperty", {"furry", "quick", "shy", "alert", "hungry"}},
        {"CapableOf", {"run", "hunt", "swim", "climb", "hide"}},
        {"HasA", {"four legs", "a tail", "sharp teeth", "whiskers", "a nest"}},
        {"PartOf", {"the food chain", "a herd", "an ecosystem"}},
        {"AtLocation", {"the forest", "a meadow", "the river", "a den"}},
        {"LocatedNear", {"the river", "tall grass", "a hollow log"}},
        {"ReceivesAction", {"hunted", "tracked", "fed", "studied"}},
        {"UsedFor", {"companionship", "research", "food"}},
        {"MadeOf", {"flesh", "bone", "fur"}},
        {"DefinedAs", {"a wild animal", "a small creature", "a living being"}},
        {"InstanceOf", {"wildlife", "fauna"}},
        {"FormOf", {"beast", "critter"}}}},
      {"tool", false,
       {"hammer", "chisel", "wrench", "saw", "drill", "trowel", "pliers", "lever", "file", "awl", "mallet", "clamp",
        "spade", "rasp", "gauge", "vise"},
       {{"IsA", {"tool", "implement", "device", "instrument"}},
        {"HasProperty", {"heavy", "sharp", "sturdy", "metallic", "durable"}},
        {"CapableOf", {"cut", "break", "grip", "shape", "bend"}},
        {"HasA", {"a handle", "a blade", "a steel head", "a grip"}},
        {"PartOf", {"a toolbox", "a workshop kit", "a tool set"}},
        {"AtLocation", {"the workshop", "a toolbox", "the garage", "a shed"}},
        {"LocatedNear", {"the workbench", "a pegboard", "the garage door"}},
        {"ReceivesAction", {"sharpened", "repaired", "oiled", "borrowed"}},
        {"UsedFor", {"building", "repair", "carpentry", "metalwork"}},
        {"MadeOf", {"steel", "iron", "wood", "alloy"}},
        {"DefinedAs", {"a hand tool", "a work implement", "a crafting device"}},
        {"InstanceOf", {"hardware", "equipment"}},
        {"FormOf", {"gear", "kit"}}}},
      {"food", false,
       {"bread", "cheese", "soup", "pie", "stew", "noodle", "biscuit", "pudding", "tart", "porridge", "dumpling",
        "pancake", "sausage", "salad", "jam", "cake"},
       {{"IsA", {"food", "dish", "meal", "snack"}},
        {"HasProperty", {"tasty", "sweet", "salty", "warm", "filling"}},
        {"CapableOf", {"spoil", "nourish", "melt", "rise"}},
        {"HasA", {"a crust", "a filling", "a rich flavor", "a sauce"}},
        {"PartOf", {"a meal", "a feast", "a picnic"}},
        {"AtLocation", {"the kitchen", "a bakery", "the pantry", "a table"}},
        {"LocatedNear", {"the oven", "a plate", "the stove"}},
        {"ReceivesAction", {"eaten", "baked", "served", "cooked"}},
        {"UsedFor", {"eating", "breakfast", "dinner", "celebration"}},
        {"MadeOf", {"flour", "milk", "eggs", "sugar"}},
        {"DefinedAs", {"an edible dish", "a prepared food", "a kind of meal"}},
        {"InstanceOf", {"cuisine", "cooking"}},
        {"FormOf", {"fare", "grub"}}}},
      {"plant", false,
       {"fern", "oak", "willow", "tulip", "ivy", "cactus", "clover", "maple", "lily", "thistle", "bamboo", "moss",
        "orchid", "pine", "reed", "sage"},
       {{"IsA", {"plant", "organism", "flora", "vegetation"}},
        {"HasProperty", {"green", "leafy", "tall", "fragrant", "hardy"}},
        {"CapableOf", {"grow", "bloom", "wilt", "spread"}},
        {"HasA", {"roots", "leaves", "a stem", "petals", "seeds"}},
        {"PartOf", {"a garden", "the forest", "a hedge"}},
        {"AtLocation", {"a garden", "the field", "a pot", "the hillside"}},
        {"LocatedNear", {"the fence", "a pond", "the path"}},
        {"ReceivesAction", {"watered", "pruned", "planted", "picked"}},
        {"UsedFor", {"decoration", "shade", "medicine", "timber"}},
        {"MadeOf", {"cells", "cellulose", "fiber"}},
        {"DefinedAs", {"a green plant", "a rooted organism", "a flowering plant"}},
        {"InstanceOf", {"botany", "greenery"}},
        {"FormOf", {"herb", "shrub"}}}},
      {"vehicle", false,
       {"wagon", "barge", "sled", "tram", "canoe", "scooter", "truck", "glider", "ferry", "cart", "yacht", "bus",
        "tractor", "kayak", "rickshaw", "van"},
       {{"IsA", {"vehicle", "conveyance", "machine", "transport"}},
        {"HasProperty", {"fast", "loud", "large", "reliable", "slow"}},
        {"CapableOf", {"move", "carry cargo", "travel", "transport people"}},
        {"HasA", {"wheels", "an engine", "seats", "a steering wheel"}},
        {"PartOf", {"a fleet", "traffic", "a convoy"}},
        {"AtLocation", {"the road", "a harbor", "the depot", "a station"}},
        {"LocatedNear", {"the highway", "a dock", "the bridge"}},
        {"ReceivesAction", {"driven", "parked", "repaired", "washed"}},
        {"UsedFor", {"travel", "transport", "delivery", "commuting"}},
        {"MadeOf", {"metal", "steel", "plastic", "wood"}},
        {"DefinedAs", {"a means of transport", "a moving machine", "a travel vehicle"}},
        {"InstanceOf", {"transportation", "machinery"}},
        {"FormOf", {"ride", "carrier"}}}},
      {"place", false,
       {"harbor", "valley", "market", "library", "canyon", "village", "castle", "island", "plaza", "temple", "cave",
        "meadow", "chapel", "lagoon", "bazaar", "fortress"},
       {{"IsA", {"place", "location", "site", "area"}},
        {"HasProperty", {"crowded", "quiet", "old", "beautiful", "remote"}},
        {"CapableOf", {"host visitors", "shelter people", "attract tourists"}},
        {"HasA", {"a gate", "many visitors", "old walls", "a long history"}},
        {"PartOf", {"a city", "a region", "a country"}},
        {"AtLocation", {"the coast", "a city", "the mountains", "the countryside"}},
        {"LocatedNear", {"the sea", "a mountain", "the old town"}},
        {"ReceivesAction", {"visited", "explored", "mapped", "protected"}},
        {"UsedFor", {"gathering", "trade", "worship", "living"}},
        {"MadeOf", {"stone", "brick", "earth", "marble"}},
        {"DefinedAs", {"a public place", "a geographic site", "a gathering place"}},
        {"InstanceOf", {"geography", "landmark"}},
        {"FormOf", {"spot", "locale"}}}},
      {"instrument", false,
       {"violin", "flute", "drum", "harp", "lute", "trumpet", "cello", "oboe", "banjo", "organ", "bugle", "tuba",
        "zither", "cymbal", "fiddle", "horn"},
       {{"IsA", {"instrument", "musical device", "noisemaker"}},
        {"HasProperty", {"loud", "melodic", "delicate", "resonant", "expensive"}},
        {"CapableOf", {"make music", "produce sound", "play melodies"}},
        {"HasA", {"strings", "keys", "a bow", "a mouthpiece"}},
        {"PartOf", {"an orchestra", "a band", "an ensemble"}},
        {"AtLocation", {"a concert hall", "the stage", "a music room", "a studio"}},
        {"LocatedNear", {"the piano", "a music stand", "the stage"}},
        {"ReceivesAction", {"played", "tuned", "practiced", "polished"}},
        {"UsedFor", {"music", "performance", "concerts", "teaching"}},
        {"MadeOf", {"wood", "brass", "gut", "ivory"}},
        {"DefinedAs", {"a musical instrument", "a sound maker", "an orchestral instrument"}},
        {"InstanceOf", {"music", "artistry"}},
        {"FormOf", {"axe", "piece"}}}},
      {"clothing", false,
       {"cloak", "boot", "scarf", "glove", "tunic", "bonnet", "vest", "sandal", "mitten", "shawl", "apron", "gown",
        "jacket", "sock", "belt", "hood"},
       {{"IsA", {"clothing", "garment", "apparel", "attire"}},
        {"HasProperty", {"warm", "soft", "colorful", "woolen", "fashionable"}},
        {"CapableOf", {"keep warm", "protect skin", "wrinkle"}},
        {"HasA", {"buttons", "a zipper", "pockets", "a collar"}},
        {"PartOf", {"an outfit", "a uniform", "a wardrobe"}},
        {"AtLocation", {"the closet", "a wardrobe", "a drawer", "a shop"}},
        {"LocatedNear", {"the coat rack", "a mirror", "the door"}},
        {"ReceivesAction", {"worn", "washed", "ironed", "sewn"}},
        {"UsedFor", {"warmth", "fashion", "protection", "dressing"}},
        {"MadeOf", {"wool", "cotton", "leather", "silk"}},
        {"DefinedAs", {"a piece of clothing", "a worn garment", "an item of attire"}},
        {"InstanceOf", {"fashion", "dress"}},
        {"FormOf", {"wear", "clothes"}}}},
      {"furniture", false,
       {"table", "stool", "bench", "cabinet", "sofa", "dresser", "shelf", "bed", "chair", "desk", "chest", "cradle",
        "ottoman", "wardrobe", "couch", "cupboard"},
       {{"IsA", {"furniture", "furnishing", "household item"}},
        {"HasProperty", {"wooden", "comfortable", "sturdy", "antique", "heavy"}},
        {"CapableOf", {"hold things", "support weight", "creak"}},
        {"HasA", {"legs", "drawers", "a flat top", "cushions"}},
        {"PartOf", {"a room", "a house", "a furniture set"}},
        {"AtLocation", {"the living room", "a bedroom", "an office", "the hall"}},
        {"LocatedNear", {"the wall", "a window", "the fireplace"}},
        {"ReceivesAction", {"moved", "assembled", "polished", "painted"}},
        {"UsedFor", {"sitting", "storage", "sleeping", "working"}},
        {"MadeOf", {"oak", "pine", "metal", "fabric"}},
        {"DefinedAs", {"a piece of furniture", "a household fixture", "an indoor furnishing"}},
        {"InstanceOf", {"furnishing", "decor"}},
        {"FormOf", {"fixture", "fitting"}}}},
      {"emotion", true,
       {"joy", "grief", "envy", "pride", "shame", "hope", "dread", "awe", "rage", "calm", "longing", "regret",
        "delight", "sorrow", "guilt", "relief"},
       {{"IsA", {"emotion", "feeling", "mental state", "mood"}},
        {"HasProperty", {"intense", "fleeting", "powerful", "painful", "pleasant"}},
        {"CapableOf", {"motivate people", "fade", "overwhelm", "spread"}},
        {"HasA", {"a cause", "a physical sign", "a duration"}},
        {"PartOf", {"human nature", "experience", "the psyche"}},
        {"AtLocation", {"the heart", "the mind", "a memory"}},
        {"LocatedNear", {"anger", "fear", "happiness"}},
        {"ReceivesAction", {"felt", "expressed", "suppressed", "shared"}},
        {"UsedFor", {"communication", "bonding", "survival"}},
        {"MadeOf", {"thoughts", "memories", "sensations"}},
        {"DefinedAs", {"a strong feeling", "an emotional state", "an inner experience"}},
        {"InstanceOf", {"affect", "sentiment"}},
        {"FormOf", {"passion", "emotion"}}}},
      {"idea", true,
       {"justice", "freedom", "truth", "logic", "theory", "duty", "honor", "wisdom", "faith", "beauty", "order",
        "chance", "progress", "virtue", "liberty", "reason"},
       {{"IsA", {"idea", "concept", "abstraction", "principle"}},
        {"HasProperty", {"abstract", "important", "complex", "timeless", "debated"}},
        {"CapableOf", {"inspire people", "change society", "guide decisions"}},
        {"HasA", {"a definition", "a long history", "many interpretations"}},
        {"PartOf", {"philosophy", "ethics", "a belief system"}},
        {"AtLocation", {"a book", "the mind", "a lecture", "a debate"}},
        {"LocatedNear", {"morality", "knowledge", "belief"}},
        {"ReceivesAction", {"discussed", "defended", "questioned", "taught"}},
        {"UsedFor", {"reasoning", "argument", "teaching", "governance"}},
        {"MadeOf", {"arguments", "principles", "words"}},
        {"DefinedAs", {"an abstract idea", "a guiding principle", "a way of thinking"}},
        {"InstanceOf", {"philosophy", "thought"}},
        {"FormOf", {"notion", "ideal"}}}},
      {"activity", true,
       {"dance", "chess", "poetry", "trade", "debate", "hunting", "fishing", "sculpture", "rowing", "archery",
        "weaving", "pottery", "singing", "juggling", "fencing", "gardening"},
       {{"IsA", {"activity", "pastime", "skill", "practice"}},
        {"HasProperty", {"fun", "difficult", "relaxing", "competitive", "creative"}},
        {"CapableOf", {"build skill", "entertain people", "take years to master"}},
        {"HasA", {"rules", "a long tradition", "practitioners", "techniques"}},
        {"PartOf", {"culture", "a festival", "daily life"}},
        {"AtLocation", {"a club", "a school", "a park", "a hall"}},
        {"LocatedNear", {"music", "sport", "art"}},
        {"ReceivesAction", {"practiced", "learned", "taught", "watched"}},
        {"UsedFor", {"recreation", "exercise", "expression", "competition"}},
        {"MadeOf", {"movements", "steps", "practice"}},
        {"DefinedAs", {"a leisure activity", "a practiced skill", "a form of recreation"}},
        {"InstanceOf", {"hobby", "craft"}},
        {"FormOf", {"pursuit", "game"}}}},
  };
  return table;
}

const std::vector<std::string> kExcludedRelations = {"Causes", "Desires", "RelatedTo", "HasSubevent",
                                                     "DerivedFrom", "HasContext", "MotivatedByGoal"};
const std::vector<std::string> kExcludedObjects = {"happiness", "a journey", "noise", "english", "work", "rest"};

}  // namespace

std::string synthesize_knowledge_graph(const SyntheticKgOptions& options) {
  require(options.concepts >= 1, "synthetic knowledge graph needs at least one concept");
  const auto& doms = domains();
  std::mt19937_64 rng(mix_seed(options.seed, 0x6b67));

  // Names: modifier + noun, dealt round-robin across domains.
  std::vector<std::vector<std::string>> names(doms.size());
  std::size_t total = 0;
  for (std::size_t d = 0; d < doms.size(); ++d) {
    for (const auto& m : kModifiers) {
      for (const auto& n : doms[d].nouns) names[d].push_back(m + " " + n);
    }
    std::shuffle(names[d].begin(), names[d].end(), rng);
    total += names[d].size();
  }
  if (static_cast<std::size_t>(options.concepts) > total) {
    throw InvalidArgument("synthetic knowledge graph supports at most " + std::to_string(total) + " concepts");
  }
  struct Entry {
    std::string name;
    std::size_t domain;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; entries.size() < static_cast<std::size_t>(options.concepts); ++i) {
    const std::size_t d = i % doms.size();
    const std::size_t k = i / doms.size();
    if (k < names[d].size()) entries.push_back({names[d][k], d});
  }
  std::vector<std::vector<std::size_t>> members(doms.size());
  for (std::size_t i = 0; i < entries.size(); ++i) members[entries[i].domain].push_back(i);

  // Triple counts per concept.
  std::vector<int> counts(entries.size(), 1);
  if (options.retained_triples > 0) {
    require(options.retained_triples >= options.concepts, "retained_triples must be at least the concept count");
    int remaining = options.retained_triples - options.concepts;
    std::uniform_int_distribution<std::size_t> any(0, entries.size() - 1);
    while (remaining > 0) {
      const std::size_t i = any(rng);
      if (counts[i] < 8) {
        ++counts[i];
        --remaining;
      }
    }
  } else {
    std::uniform_int_distribution<int> c(1, 6);
    for (auto& n : counts) n = c(rng);
  }

  const auto& relations = retained_relations();
  std::ostringstream out;
  out << "# synthetic concept knowledge graph: " << entries.size() << " concepts, seed " << options.seed << "\n";
  out << "# subject\trelation\tobject\tconcreteness\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Domain& dom = doms[entries[i].domain];
    const char* concreteness = dom.abstract ? "abstract" : "concrete";
    std::set<std::pair<std::string, std::string>> used;
    int emitted = 0;
    int guard = 0;
    while (emitted < counts[i] && guard++ < 1000) {
      const std::string& rel = relations[std::uniform_int_distribution<std::size_t>(0, relations.size() - 1)(rng)];
      std::string object;
      const bool lexical = rel == "Synonym" || rel == "SimilarTo" || rel == "Antonym" || rel == "DistinctFrom";
      if (lexical) {
        // Same-domain peer for similarity relations, other-domain concept for contrast.
        const bool same = rel == "Synonym" || rel == "SimilarTo";
        std::size_t other;
        if (same) {
          const auto& peers = members[entries[i].domain];
          other = peers[std::uniform_int_distribution<std::size_t>(0, peers.size() - 1)(rng)];
        } else {
          other = std::uniform_int_distribution<std::size_t>(0, entries.size() - 1)(rng);
        }
        if (other == i) continue;
        object = entries[other].name;
      } else {
        const auto& pool = dom.pools.at(rel);
        object = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      }
      if (!used.emplace(rel, object).second) continue;
      out << entries[i].name << '\t' << rel << '\t' << object << '\t' << concreteness << '\n';
      ++emitted;
    }
    if (emitted < counts[i]) throw Error("synthetic generator could not place triples for " + entries[i].name);
  }
  std::uniform_int_distribution<std::size_t> any(0, entries.size() - 1);
  for (int e = 0; e < options.excluded_triples; ++e) {
    const auto& rel = kExcludedRelations[static_cast<std::size_t>(e) % kExcludedRelations.size()];
    const auto& obj = kExcludedObjects[static_cast<std::size_t>(e) % kExcludedObjects.size()];
    out << entries[any(rng)].name << '\t' << rel << '\t' << obj << '\n';
  }
  return out.str();
}

}  // namespace cc
