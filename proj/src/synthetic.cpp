#include "falmkit/synthetic.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "falmkit/error.hpp"
#include "falmkit/parallel.hpp"
#include "falmkit/rng.hpp"

namespace falmkit {
namespace {

// Leading tag keeps these streams apart from the ones other modules derive from the same seed.
constexpr std::uint64_t kTag = 0x73796e7468ULL;
enum Stream : std::uint64_t { kDevices = 1, kSubjects = 2, kMedsSubjects = 3, kRender = 4 };

std::string numbered(const char* prefix, std::size_t i, int width = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

std::string iso_from_days(long z) {
  // Howard Hinnant's civil_from_days.
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long y = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04ld-%02u-%02u", y + (m <= 2), m, d);
  return buf;
}

double clamp_l(double l) { return std::clamp(l, 0.0, 100.0); }

std::vector<std::size_t> group_counts(const PopulationSpec& spec, std::size_t n) {
  // Largest-remainder apportionment so counts are exact and sum to n.
  std::vector<std::size_t> counts(spec.groups.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    const double share = spec.groups[g].proportion * static_cast<double>(n);
    counts[g] = static_cast<std::size_t>(std::floor(share + 1e-9));
    assigned += counts[g];
    rema.emplace_back(share - static_cast<double>(counts[g]), g);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[rema[k % rema.size()].second];
  return counts;
}

std::vector<double> device_ladder(std::size_t n, double sd, Rng rng) {
  const boost::math::normal standard;
  std::vector<double> offsets(n);
  for (std::size_t k = 0; k < n; ++k) {
    offsets[k] = sd * boost::math::quantile(standard, (static_cast<double>(k) + 0.5) / static_cast<double>(n));
  }
  for (std::size_t k = n; k > 1; --k) std::swap(offsets[k - 1], offsets[rng.uniform_index(k)]);
  return offsets;
}

Fst draw_fst(const GroupSpec& group, double latent) {
  const double u = boost::math::cdf(boost::math::normal(), latent);
  const double total = std::accumulate(group.fst_weights.begin(), group.fst_weights.end(), 0.0);
  double cum = 0.0;
  for (int k = 0; k < 6; ++k) {
    cum += group.fst_weights[static_cast<std::size_t>(k)] / total;
    if (u <= cum) return static_cast<Fst>(k + 1);
  }
  return Fst::VI;
}

}  // namespace

void PopulationSpec::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorKind::kConfig, "population spec: " + m); };
  if (n_subjects < 2) bad("n_subjects must be >= 2");
  if (groups.size() < 2) bad("need at least two groups");
  double total = 0.0;
  for (const auto& g : groups) {
    if (g.label.empty()) bad("group label must be non-empty");
    if (!(g.proportion > 0.0)) bad("group proportions must be positive");
    total += g.proportion;
    double w = 0.0;
    for (double x : g.fst_weights) {
      if (x < 0.0) bad("FST weights must be non-negative");
      w += x;
    }
    if (!(w > 0.0)) bad("FST weights must not all be zero");
  }
  if (std::abs(total - 1.0) > 1e-6) bad("group proportions must sum to 1");
  for (double sd : {within_group_sd, age_sd, colormeter_sd}) {
    if (!(sd > 0.0)) bad("standard deviations must be > 0");
  }
  for (double sd : {subject_bias_sd, subject_device_sd, device_sd, time_sd, image_sd, enrollment_exposure_sd, enrollment_noise_sd,
                    background_noise_sd, noise_scale, pixel_noise, fst_lightness_weight}) {
    if (!(sd >= 0.0) || !std::isfinite(sd)) bad("noise parameters must be finite and >= 0");
  }
  if (!(female_fraction >= 0.0 && female_fraction <= 1.0)) bad("female_fraction must be in [0, 1]");
  if (!(age_min < age_max)) bad("age_min must be < age_max");
  if (n_devices < 1 || acquisition_devices < 1 || acquisition_devices > n_devices) {
    bad("need 1 <= acquisition_devices <= n_devices");
  }
  if (image_size < 24) bad("image_size must be >= 24");
  if (!(specular_fraction >= 0.0 && specular_fraction < 0.25)) bad("specular_fraction must be in [0, 0.25)");
  if (!(background_lightness > 0.0 && background_lightness < 100.0)) bad("background_lightness must be in (0, 100)");
  if (!CaptureDate::parse(study_date)) bad("study_date must be YYYY-MM-DD");
}

Srgb skin_colour(double lightness) {
  const double l = clamp_l(lightness);
  double chroma = 1.0;
  for (int i = 0; i < 200; ++i) {
    const Srgb c = lab_to_srgb({l, 12.0 * chroma, 18.0 * chroma});
    if (in_gamut(c)) return {std::clamp(c.r, 0.0, 255.0), std::clamp(c.g, 0.0, 255.0), std::clamp(c.b, 0.0, 255.0)};
    chroma *= 0.9;
  }
  const Srgb grey = lab_to_srgb({l, 0.0, 0.0});
  return {std::clamp(grey.r, 0.0, 255.0), std::clamp(grey.g, 0.0, 255.0), std::clamp(grey.b, 0.0, 255.0)};
}

SyntheticStudy generate_synthetic_study(const PopulationSpec& spec, std::uint64_t seed) {
  spec.validate();
  const double s = spec.noise_scale;
  const long study_day = CaptureDate::parse(spec.study_date)->days;
  const int size = spec.image_size;
  const FaceBox face{size / 4, size / 4, size / 2, size / 2};
  const BackgroundRegion background{0, 0, size, size / 8};

  const std::vector<double> device_offset =
      device_ladder(spec.n_devices, spec.device_sd, Rng::derive(seed, {kTag, kDevices}));
  const std::vector<double> meds_offset = device_ladder(5, spec.device_sd, Rng::derive(seed, {kTag, kDevices, 1}));

  std::vector<SubjectRecord> subjects;
  std::vector<ImageRecord> images;
  SyntheticStudy out;

  auto add_image = [&](const std::string& subject_id, std::string device, long day, std::string env,
                       ImageSource source, double face_l, double bg_l, bool with_background) {
    ImageRecord img;
    img.image_id = numbered("IMG", images.size() + 1, 6);
    img.subject_id = subject_id;
    img.device_id = std::move(device);
    img.capture_date = *CaptureDate::parse(iso_from_days(day));
    img.environment_tag = std::move(env);
    img.source = source;
    img.face_box = face;
    if (with_background) img.background = background;
    img.path = "images/" + img.image_id + ".bmp";
    images.push_back(std::move(img));
    out.intended_face.push_back(clamp_l(face_l));
    out.intended_background.push_back(clamp_l(bg_l));
  };

  auto make_subject = [&](Rng& rng, const GroupSpec& group, const std::string& id, double& truth) {
    SubjectRecord rec;
    rec.subject_id = id;
    rec.race = group.label;
    const double within = rng.normal();
    truth = clamp_l(group.mean_lightness + spec.within_group_sd * within);
    rec.gender = rng.bernoulli(spec.female_fraction) ? "F" : "M";
    rec.age = std::round(std::clamp(rng.normal(spec.age_mean, spec.age_sd), spec.age_min, spec.age_max));
    const double w = spec.fst_lightness_weight;
    const double latent = (-w * within + rng.normal()) / std::sqrt(1.0 + w * w);
    rec.fst = draw_fst(group, latent);
    return rec;
  };

  const auto counts = group_counts(spec, spec.n_subjects);
  std::size_t subject_index = 0;
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    for (std::size_t c = 0; c < counts[g]; ++c, ++subject_index) {
      Rng rng = Rng::derive(seed, {kTag, kSubjects, subject_index});
      double truth = 0.0;
      SubjectRecord rec = make_subject(rng, spec.groups[g], numbered("S", subject_index + 1), truth);
      const double rc = rng.normal(truth, spec.colormeter_sd);
      const double lc = rng.normal(truth, spec.colormeter_sd);
      rec.colormeter = ColormeterReading{clamp_l(rc), clamp_l(lc)};
      const double bias = rng.normal(0.0, spec.subject_bias_sd);
      std::vector<double> pair(spec.n_devices);
      for (double& p : pair) p = rng.normal(0.0, spec.subject_device_sd);

      for (std::size_t k = 0; k < spec.acquisition_devices; ++k) {
        const double e = rng.normal(0.0, spec.image_sd);
        const double shift = s * (bias + pair[k] + device_offset[k]);
        add_image(rec.subject_id, numbered("cam", k + 1, 2), study_day, "mdtf", ImageSource::kAcquisition,
                  truth + shift + s * e, spec.background_lightness + shift, false);
      }
      for (std::size_t v = 0; v < spec.historic_visits; ++v) {
        const long day = study_day - 30 - static_cast<long>(rng.uniform_index(700));
        const double drift = rng.normal(0.0, spec.time_sd);
        for (std::size_t j = 0; j < spec.historic_images_per_visit; ++j) {
          const std::size_t k = rng.uniform_index(spec.n_devices);
          const double e = rng.normal(0.0, spec.image_sd);
          const double shift = s * (bias + pair[k] + device_offset[k] + drift);
          add_image(rec.subject_id, numbered("cam", k + 1, 2), day, "mdtf", ImageSource::kHistoric,
                    truth + shift + s * e, spec.background_lightness + shift, false);
        }
      }
      {
        const double exposure = rng.normal(0.0, spec.enrollment_exposure_sd);
        const double ef = rng.normal(0.0, spec.enrollment_noise_sd);
        const double eb = rng.normal(0.0, spec.background_noise_sd);
        add_image(rec.subject_id, "enroll", study_day, "mdtf", ImageSource::kEnrollment,
                  truth + s * (bias + exposure + ef), spec.background_lightness + s * (bias + exposure + eb), true);
      }
      subjects.push_back(std::move(rec));
      out.true_lightness.push_back(truth);
    }
  }

  const auto meds_counts = group_counts(spec, spec.meds_subjects);
  std::size_t meds_index = 0;
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    for (std::size_t c = 0; c < meds_counts[g]; ++c, ++meds_index) {
      Rng rng = Rng::derive(seed, {kTag, kMedsSubjects, meds_index});
      double truth = 0.0;
      SubjectRecord rec = make_subject(rng, spec.groups[g], numbered("M", meds_index + 1), truth);
      rec.fst.reset();
      const double bias = rng.normal(0.0, spec.subject_bias_sd);
      for (std::size_t j = 0; j < spec.meds_images_per_subject; ++j) {
        const std::size_t k = rng.uniform_index(meds_offset.size());
        const std::size_t site = rng.uniform_index(4);
        const long day = study_day - 3000 - static_cast<long>(rng.uniform_index(3000));
        const double e = rng.normal(0.0, spec.image_sd);
        const double shift = spec.meds_offset + s * (bias + meds_offset[k]);
        add_image(rec.subject_id, numbered("meds", k + 1, 1), day, numbered("booking", site + 1, 1),
                  ImageSource::kMeds, truth + shift + s * e, spec.background_lightness + shift, false);
      }
      subjects.push_back(std::move(rec));
      out.true_lightness.push_back(truth);
    }
  }

  out.bundle = StudyBundle(std::move(subjects), std::move(images), standard_datasets());
  return out;
}

Image render_patch(const PatchSpec& patch, Rng& rng) {
  const int size = patch.size;
  const Srgb bg = lab_to_srgb({std::clamp(patch.background_lightness, 0.0, 100.0), 0.0, 0.0});
  const Srgb skin = skin_colour(patch.face_lightness);
  const Srgb specular{250.0, 248.0, 245.0};

  const double cx = patch.face.x + 0.5 * patch.face.width;
  const double cy = patch.face.y + 0.5 * patch.face.height;
  const double radius = 0.45 * std::min(patch.face.width, patch.face.height);

  auto quantise = [&](double v) {
    const double jittered = std::clamp(v, 0.0, 255.0) + patch.pixel_noise * rng.normal();
    return static_cast<std::uint8_t>(std::clamp(std::lround(jittered), 0L, 255L));
  };

  Image img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      const bool in_face = dx * dx + dy * dy <= radius * radius;
      // Draw the specular decision for every pixel so the stream layout is fixed.
      const bool highlight = rng.uniform() < patch.specular_fraction;
      const Srgb c = in_face ? (highlight ? specular : skin) : bg;
      img.at(x, y) = {quantise(c.r), quantise(c.g), quantise(c.b)};
    }
  }
  return img;
}

Image render_study_image(const SyntheticStudy& study, std::size_t index, const PopulationSpec& spec,
                         std::uint64_t seed) {
  const ImageRecord& rec = study.bundle.images().at(index);
  Rng rng = Rng::derive(seed, {kTag, kRender, index});
  return render_patch({spec.image_size, rec.face_box, study.intended_face[index], study.intended_background[index],
                       spec.pixel_noise, spec.specular_fraction},
                      rng);
}

std::vector<ImageMeasurement> intended_measurements(const SyntheticStudy& study) {
  std::vector<ImageMeasurement> out;
  const auto& images = study.bundle.images();
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    ImageMeasurement m{img.image_id, img.subject_id, img.device_id, img.capture_date.iso, img.environment_tag,
                       img.source, study.intended_face[i], std::nullopt, 0};
    if (img.background) m.background_lightness = study.intended_background[i];
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<ImageMeasurement> rendered_measurements(const SyntheticStudy& study, const PopulationSpec& spec,
                                                    std::uint64_t seed, const MaskParams& mask, unsigned jobs) {
  const auto& images = study.bundle.images();
  std::vector<ImageMeasurement> out(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t i) {
    const auto& rec = images[i];
    const Image img = render_study_image(study, i, spec, seed);
    ImageMeasurement m{rec.image_id, rec.subject_id, rec.device_id, rec.capture_date.iso, rec.environment_tag,
                       rec.source, image_falm(img, rec.face_box, mask), std::nullopt, 0};
    if (rec.background) m.background_lightness = background_lightness(img, *rec.background, &rec.face_box);
    out[i] = std::move(m);
  });
  return out;
}

}  // namespace falmkit
