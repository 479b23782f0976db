#include <gtest/gtest.h>

#include "laft/datagen.hpp"
#include "laft/vocab.hpp"

#include <algorithm>
#include <set>

using namespace laft;

namespace {

CorpusSpec quiet_spec() {
  CorpusSpec s;
  s.clips = 20;
  s.frames = 128;
  s.events = {library_event("dog"), library_event("car_horn"), library_event("bell")};
  s.noise_std = 0.0;
  s.min_events = 1;
  s.max_events = 1;
  return s;
}

std::set<std::string> words_of(const Corpus& c) {
  std::set<std::string> out;
  for (const auto& cap : c.captions(Split::train))
    for (auto& t : tokenize(cap)) out.insert(t);
  return out;
}

}  // namespace

TEST(Datagen, NoiselessSingleEventIsTheTemplateAtItsOnset) {
  const CorpusSpec spec = quiet_spec();
  const Corpus c = generate_corpus(spec);
  ASSERT_EQ(c.clips.size(), 20u);
  for (const Clip& clip : c.clips) {
    ASSERT_EQ(clip.timeline.size(), 1u);
    const EventOccurrence& ev = clip.timeline[0];
    const RowMatrix tpl = event_template(library_event(ev.event), spec.bands, spec.template_seed);
    RowMatrix expect = RowMatrix::Constant(spec.frames, spec.bands, spec.background);
    expect.middleRows(ev.onset, ev.duration) += tpl;
    EXPECT_TRUE(clip.features == expect.cast<float>().cast<double>()) << clip.id;
  }
}

TEST(Datagen, SameSeedIsBitIdenticalAndOtherSeedsDiffer) {
  CorpusSpec spec = standard_pairs(3).second;
  spec.clips = 30;
  const Corpus a = generate_corpus(spec), b = generate_corpus(spec);
  EXPECT_EQ(corpus_checksum(a), corpus_checksum(b));
  for (std::size_t i = 0; i < a.clips.size(); ++i) {
    EXPECT_TRUE(a.clips[i].features == b.clips[i].features);
    EXPECT_EQ(a.clips[i].captions, b.clips[i].captions);
  }
  spec.seed += 1;
  EXPECT_NE(corpus_checksum(generate_corpus(spec)), corpus_checksum(a));
  const CorpusSpec from_json = corpus_spec_from_json(to_json(spec));
  EXPECT_EQ(corpus_checksum(generate_corpus(from_json)), corpus_checksum(generate_corpus(spec)));
}

TEST(Datagen, CaptionPhrasesFollowTheTimeline) {
  const Corpus c = generate_corpus(standard_pairs(0).first);
  for (const Clip& clip : c.clips) {
    EXPECT_EQ(clip.captions.size(), 5u);
    for (std::size_t e = 1; e < clip.timeline.size(); ++e)
      EXPECT_GT(clip.timeline[e].onset, clip.timeline[e - 1].onset + clip.timeline[e - 1].duration - 1);
    for (const auto& cap : clip.captions) {
      std::size_t last = 0;
      for (const auto& ev : clip.timeline) {
        const std::string& noun = library_event(ev.event).noun;
        const std::size_t at = cap.find(noun.substr(noun.find(' ') + 1), last);
        ASSERT_NE(at, std::string::npos) << cap << " / " << ev.event;
        EXPECT_GE(at, last);
        last = at + 1;
      }
    }
  }
}

TEST(Datagen, TimelineFitsInsideTheClipWithGaps) {
  const CorpusSpec spec = standard_pairs(0).second;
  for (const Clip& clip : generate_corpus(spec).clips) {
    EXPECT_GE(clip.timeline.front().onset, spec.min_gap);
    const auto& last = clip.timeline.back();
    EXPECT_LE(last.onset + last.duration + spec.min_gap, spec.frames);
    EXPECT_GE(static_cast<Index>(clip.timeline.size()), spec.min_events);
    EXPECT_LE(static_cast<Index>(clip.timeline.size()), spec.max_events);
  }
}

TEST(Datagen, SplitIsEightyTenTen) {
  const Corpus c = generate_corpus(standard_pairs(0).second);
  EXPECT_EQ(c.select(Split::train).size(), 160u);
  EXPECT_EQ(c.select(Split::val).size(), 20u);
  EXPECT_EQ(c.select(Split::eval).size(), 20u);
}

TEST(Datagen, StandardPairShape) {
  const auto [a, b] = standard_pairs(0);
  EXPECT_EQ(a.clips, 1000);
  EXPECT_EQ(b.clips, 200);
  EXPECT_EQ(a.events.size(), 6u);
  EXPECT_EQ(b.events.size(), 6u);
  std::size_t shared = 0;
  for (const auto& e : b.events) {
    const auto it = std::find_if(a.events.begin(), a.events.end(), [&](const EventType& x) { return x.name == e.name; });
    if (it == a.events.end()) continue;
    ++shared;
    EXPECT_TRUE(event_template(e, b.bands, b.template_seed) == event_template(*it, a.bands, a.template_seed));
  }
  EXPECT_EQ(shared, 4u);

  const auto va = words_of(generate_corpus(a)), vb = words_of(generate_corpus(b));
  std::vector<std::string> common, only_b;
  std::set_intersection(va.begin(), va.end(), vb.begin(), vb.end(), std::back_inserter(common));
  std::set_difference(vb.begin(), vb.end(), va.begin(), va.end(), std::back_inserter(only_b));
  EXPECT_FALSE(common.empty());
  EXPECT_FALSE(only_b.empty());
}

TEST(Datagen, CaptionStylesStartWithDistinctWords) {
  const EventType* evs[] = {&library_event("dog"), &library_event("siren")};
  std::set<std::string> first;
  for (Index s = 0; s < caption_style_count(); ++s) first.insert(tokenize(render_caption(evs, s)).front());
  EXPECT_EQ(static_cast<Index>(first.size()), caption_style_count());
  EXPECT_EQ(render_caption(std::span(evs, 2), 0), "a dog barks then a siren wails");
}

TEST(Datagen, InvalidSpecsAreRejected) {
  CorpusSpec s = quiet_spec();
  s.max_events = 3;
  s.min_events = 3;
  s.frames = 64;
  EXPECT_THROW(generate_corpus(s), std::invalid_argument);
  s = quiet_spec();
  s.events.resize(1);
  EXPECT_THROW(generate_corpus(s), std::invalid_argument);
  s = quiet_spec();
  s.clips = 5;
  EXPECT_THROW(generate_corpus(s), std::invalid_argument);
  EXPECT_THROW(library_event("unicorn"), std::invalid_argument);
  EXPECT_THROW(corpus_spec_from_json(nlohmann::json{{"clipz", 10}}), ConfigError);
}
