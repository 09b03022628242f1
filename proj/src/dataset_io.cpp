#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wav/datasets.hpp"

namespace wav::data {

using nlohmann::json;

struct SplitIo {
  static Action hidden(const UnlabeledTransition& u) { return u.hidden_action_; }
  static void set_hidden(UnlabeledTransition& u, Action a) { u.hidden_action_ = a; }
};

namespace {

constexpr std::array<std::string_view, 4> kParts = {"seed", "pool", "test", "video"};

json shape_json(const grid::GridShape& s) {
  return {{"width", s.width}, {"height", s.height}, {"floor_palette", s.floor_palette}};
}

json meta_json(const TransitionMeta& m) {
  json j = {{"task", m.task}};
  if (m.front_object) j["front_object"] = composition_name(*m.front_object);
  return j;
}

json record(const FeatureLayout& layout, std::uint64_t id, const FeatureVector& s, const FeatureVector& s_next,
            const TransitionMeta& meta) {
  return {{"id", id},
          {"s", grid::active_indices(layout, s)},
          {"s_next", grid::active_indices(layout, s_next)},
          {"meta", meta_json(meta)}};
}

json labeled_json(const FeatureLayout& layout, const LabeledTransition& t) {
  json j = record(layout, t.id, t.s, t.s_next, t.meta);
  j["kind"] = "labeled";
  j["a"] = grid::action_name(t.a);
  return j;
}

json unlabeled_json(const FeatureLayout& layout, const UnlabeledTransition& u) {
  json j = record(layout, u.id, u.s, u.s_next, u.meta);
  j["kind"] = "unlabeled";
  j["hidden_a"] = grid::action_name(SplitIo::hidden(u));
  return j;
}

std::size_t part_count(const ExperimentSplit& split, std::string_view part) {
  if (part == "seed") return split.seed_labeled.size();
  if (part == "pool") return split.pool.size();
  if (part == "test") return split.test.size();
  return split.video.size();
}

// Field access with line-numbered errors.
class RecordReader {
 public:
  RecordReader(std::string file, std::size_t line) : file_(std::move(file)), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(file_, line_, what); }

  const json& field(const json& j, const char* key) const {
    auto it = j.find(key);
    if (it == j.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }

  template <class T>
  T get(const json& j, const char* key) const {
    try {
      return field(j, key).get<T>();
    } catch (const json::exception& e) {
      fail(std::string("bad field '") + key + "': " + e.what());
    }
  }

  Action action(const json& j, const char* key) const {
    const auto name = get<std::string>(j, key);
    const auto a = grid::parse_action(name);
    if (!a) fail("unknown action '" + name + "'");
    return *a;
  }

  FeatureVector features(const FeatureLayout& layout, const json& j, const char* key) const {
    try {
      return grid::from_active_indices(layout, get<std::vector<std::uint32_t>>(j, key));
    } catch (const PreconditionError& e) {
      fail(std::string("field '") + key + "': " + e.what());
    }
  }

  TransitionMeta meta(const json& j) const {
    const json& m = field(j, "meta");
    TransitionMeta out;
    out.task = get<std::string>(m, "task");
    if (m.contains("front_object")) {
      const auto name = get<std::string>(m, "front_object");
      out.front_object = parse_composition(name);
      if (!out.front_object) fail("unknown front_object '" + name + "'");
    }
    return out;
  }

 private:
  std::string file_;
  std::size_t line_;
};

void read_partition(const std::filesystem::path& path, std::string_view part, ExperimentSplit& split,
                    bool first) {
  std::ifstream in(path, std::ios::binary);
  const std::string file = path.string();
  if (!in) throw ParseError(file, 0, "cannot open file");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(file, 1, "missing header");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(file, 1, std::string("malformed header: ") + e.what());
  }
  RecordReader hr(file, 1);
  const auto schema = hr.get<std::string>(header, "schema");
  if (schema != kSplitSchema) {
    throw UnsupportedSchema(file, 1, "unsupported schema version '" + schema + "' (expected " + kSplitSchema + ")");
  }
  if (hr.get<std::string>(header, "part") != part) hr.fail("header part does not match file name");
  const json& shape_j = hr.field(header, "shape");
  grid::GridShape shape{hr.get<int>(shape_j, "width"), hr.get<int>(shape_j, "height"),
                        hr.get<int>(shape_j, "floor_palette")};
  if (first) {
    split.shape = shape;
  } else if (!(shape == split.shape)) {
    hr.fail("grid shape differs from other partitions");
  }
  const FeatureLayout layout(shape);
  const auto count = hr.get<std::size_t>(header, "count");

  std::size_t lineno = 1;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++lineno;
    RecordReader r(file, lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      r.fail(std::string("malformed record: ") + e.what());
    }
    const auto kind = r.get<std::string>(j, "kind");
    const bool labeled_part = part == "seed" || part == "test";
    if (kind != (labeled_part ? "labeled" : "unlabeled")) r.fail("unexpected record kind '" + kind + "'");
    const auto id = r.get<std::uint64_t>(j, "id");
    auto s = r.features(layout, j, "s");
    auto s_next = r.features(layout, j, "s_next");
    auto meta = r.meta(j);
    if (labeled_part) {
      if (j.contains("hidden_a")) r.fail("labeled record carries 'hidden_a'");
      LabeledTransition t{id, std::move(s), r.action(j, "a"), std::move(s_next), std::move(meta)};
      (part == "seed" ? split.seed_labeled : split.test).push_back(std::move(t));
    } else {
      if (j.contains("a")) r.fail("unlabeled record exposes 'a'");
      UnlabeledTransition u;
      u.id = id;
      u.s = std::move(s);
      u.s_next = std::move(s_next);
      u.meta = std::move(meta);
      SplitIo::set_hidden(u, r.action(j, "hidden_a"));
      (part == "pool" ? split.pool : split.video).push_back(std::move(u));
    }
    ++records;
  }
  if (records != count) {
    throw ParseError(file, lineno + 1,
                     "truncated partition: header declares " + std::to_string(count) + " records, found " +
                         std::to_string(records));
  }
}

}  // namespace

std::string serialize_partition(const ExperimentSplit& split, std::string_view part) {
  const FeatureLayout layout(split.shape);
  std::ostringstream out;
  json header = {{"schema", kSplitSchema},
                 {"part", part},
                 {"count", part_count(split, part)},
                 {"shape", shape_json(split.shape)}};
  out << header.dump() << '\n';
  if (part == "seed" || part == "test") {
    for (const auto& t : part == "seed" ? split.seed_labeled : split.test) out << labeled_json(layout, t).dump() << '\n';
  } else {
    for (const auto& u : part == "pool" ? split.pool : split.video) out << unlabeled_json(layout, u).dump() << '\n';
  }
  return out.str();
}

void save_split(const ExperimentSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (auto part : kParts) {
    const auto path = dir / (std::string(part) + ".jsonl");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << serialize_partition(split, part);
  }
}

ExperimentSplit load_split(const std::filesystem::path& dir) {
  ExperimentSplit split;
  bool first = true;
  for (auto part : kParts) {
    const auto path = dir / (std::string(part) + ".jsonl");
    if (!std::filesystem::exists(path)) throw ParseError(path.string(), 0, "missing partition file");
    read_partition(path, part, split, first);
    first = false;
  }
  return split;
}

}  // namespace wav::data
