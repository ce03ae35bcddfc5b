#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hintseg/core_types.hpp"
#include "hintseg/image_io.hpp"
#include "hintseg/rng.hpp"
#include "hintseg/synth_data.hpp"

namespace hintseg {

struct CorpusItem {
  Scene scene;
  PointAnnotation annotation;
  std::optional<SupervisionMask> scribble;  // transfer mode only
};

struct Corpus {
  std::vector<CorpusItem> items;
  nlohmann::json spec = nlohmann::json::object();

  std::size_t size() const { return items.size(); }
};

struct CorpusPreset {
  std::string name;
  int n_scenes = 20;
  int size = 64;
  double contrast = 0.35;
  double two_object_fraction = 0.25;
  double min_radius_frac = 0.16;
  double max_radius_frac = 0.28;
  AnnotationMode annotation;
  int bg_distance_d = 6;
};

inline CorpusPreset corpus_preset(const std::string& name) {
  CorpusPreset p;
  p.name = name;
  if (name == "tiny") {
    p.n_scenes = 20;
    p.size = 64;
  } else if (name == "small") {
    p.n_scenes = 200;
    p.size = 128;
  } else {
    throw std::invalid_argument("unknown corpus preset " + name + " (expected tiny or small)");
  }
  return p;
}

/// Scene i uses shape family i mod 3 and one object, or two with probability
/// `two_object_fraction`. Scenes whose objects cannot be placed or leave no
/// room for a background click are regenerated from the next sub-seed.
inline Corpus generate_corpus(const CorpusPreset& preset, std::uint64_t seed) {
  preset.annotation.validate();
  Corpus corpus;
  static constexpr ShapeFamily kFamilies[3] = {ShapeFamily::Blob, ShapeFamily::Ellipse, ShapeFamily::Annulus};
  for (int i = 0; i < preset.n_scenes; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%s_%04d", preset.name.c_str(), i);
    bool done = false;
    for (int attempt = 0; attempt < 50 && !done; ++attempt) {
      Rng rng(derive_seed({seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(attempt)}));
      SceneSpec spec;
      spec.height = spec.width = preset.size;
      spec.contrast = preset.contrast;
      spec.min_radius_frac = preset.min_radius_frac;
      spec.max_radius_frac = preset.max_radius_frac;
      spec.shape_family = kFamilies[i % 3];
      spec.n_objects = rng.bernoulli(preset.two_object_fraction) ? 2 : 1;
      spec.texture_seed = rng.next_u64();
      try {
        GeneratedScene g = generate_scene(spec, id);
        PointAnnotation ann = simulate_annotation(g.scene, preset.annotation, rng, preset.bg_distance_d);
        corpus.items.push_back({std::move(g.scene), std::move(ann), std::nullopt});
        done = true;
      } catch (const generation_error&) {
      }
    }
    if (!done) throw generation_error(std::string("could not generate scene ") + id);
  }
  corpus.spec = {{"preset", preset.name},
                 {"seed", seed},
                 {"n_scenes", preset.n_scenes},
                 {"size", preset.size},
                 {"contrast", preset.contrast},
                 {"two_object_fraction", preset.two_object_fraction},
                 {"min_radius_frac", preset.min_radius_frac},
                 {"max_radius_frac", preset.max_radius_frac},
                 {"annotation_mode", to_string(preset.annotation.mode)},
                 {"points_per_object", preset.annotation.points_per_object},
                 {"bg_distance_d", preset.bg_distance_d}};
  return corpus;
}

// ---------------------------------------------------------------------------
// points.csv: image_id, n, x1, y1, ..., xn, yn, xb, yb
// ---------------------------------------------------------------------------

inline std::string format_points_record(const std::string& id, const PointAnnotation& a) {
  std::ostringstream os;
  os << id << "," << a.foreground_points.size();
  for (const auto& p : a.foreground_points) os << "," << p.x << "," << p.y;
  os << "," << a.background_point.x << "," << a.background_point.y;
  return os.str();
}

struct PointsRecord {
  std::string id;
  std::vector<Point> foreground;
  std::optional<Point> background;
};

inline PointsRecord parse_points_record(const std::string& line) {
  std::vector<std::string> tok;
  std::istringstream is(line);
  std::string t;
  while (std::getline(is, t, ',')) {
    t.erase(0, t.find_first_not_of(" \t\r"));
    t.erase(t.find_last_not_of(" \t\r") + 1);
    tok.push_back(t);
  }
  if (tok.size() < 4) throw io_error("points record too short: " + line);
  PointsRecord r;
  r.id = tok[0];
  const int n = std::stoi(tok[1]);
  if (n < 1) throw io_error("points record with no foreground points: " + line);
  const std::size_t need = 2 + 2 * static_cast<std::size_t>(n);
  if (tok.size() != need && tok.size() != need + 2)
    throw io_error("points record for " + r.id + " has " + std::to_string(tok.size()) + " fields, expected " +
                   std::to_string(need + 2));
  for (int i = 0; i < n; ++i) r.foreground.push_back({std::stoi(tok[2 + 2 * i]), std::stoi(tok[3 + 2 * i])});
  if (tok.size() == need + 2) r.background = Point{std::stoi(tok[need]), std::stoi(tok[need + 1])};
  return r;
}

inline std::map<std::string, PointsRecord> read_points_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open " + path);
  std::map<std::string, PointsRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto r = parse_points_record(line);
    out[r.id] = std::move(r);
  }
  return out;
}

inline void write_corpus(const Corpus& c, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");
  std::ofstream pts(fs::path(dir) / "points.csv");
  pts << "# image_id, n, x1, y1, ..., xn, yn, xb, yb\n";
  for (const auto& it : c.items) {
    write_rgb_png((fs::path(dir) / "images" / (it.scene.id + ".png")).string(), it.scene.image);
    if (it.scene.mask) write_mask_png((fs::path(dir) / "masks" / (it.scene.id + ".png")).string(), *it.scene.mask);
    pts << format_points_record(it.scene.id, it.annotation) << "\n";
  }
  std::ofstream(fs::path(dir) / "spec.json") << c.spec.dump(2) << "\n";
}

/// Reads images/, masks/ (optional per image), points.csv, spec.json
/// (optional) and scribbles/ (optional). Records without a background click
/// get one sampled farther than 2d from all foreground points, seeded by the
/// image id.
inline Corpus read_corpus(const std::string& dir, int d = 10) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::is_directory(root / "images")) throw io_error("corpus " + dir + " has no images/ directory");
  const auto records = read_points_file((root / "points.csv").string());
  Corpus c;
  if (fs::exists(root / "spec.json")) {
    std::ifstream is(root / "spec.json");
    c.spec = nlohmann::json::parse(is);
  }
  std::vector<fs::path> images;
  for (const auto& e : fs::directory_iterator(root / "images"))
    if (e.path().extension() == ".png") images.push_back(e.path());
  std::sort(images.begin(), images.end());
  for (const auto& p : images) {
    const std::string id = p.stem().string();
    auto rec = records.find(id);
    if (rec == records.end()) throw io_error("no point annotation for image " + id);
    std::optional<BinaryMask> mask;
    const fs::path mp = root / "masks" / (id + ".png");
    if (fs::exists(mp)) mask = read_mask_png(mp.string());
    Scene scene = make_scene(read_rgb_png(p.string()), std::move(mask), id);
    PointAnnotation ann;
    ann.foreground_points = rec->second.foreground;
    ann.n_objects = static_cast<int>(ann.foreground_points.size());
    if (rec->second.background) {
      ann.background_point = *rec->second.background;
    } else {
      Rng rng(hash_string(id));
      ann.background_point = sample_background_point(ann.foreground_points, scene.height(), scene.width(), d, rng);
    }
    ann.validate(scene.height(), scene.width());
    std::optional<SupervisionMask> scribble;
    const fs::path sp = root / "scribbles" / (id + ".png");
    if (fs::exists(sp)) scribble = read_supervision_png(sp.string());
    c.items.push_back({std::move(scene), std::move(ann), std::move(scribble)});
  }
  return c;
}

}  // namespace hintseg
