#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "eor/similarity.hpp"
#include "support.hpp"

using namespace eor;

namespace {

VoteResult vote(const std::vector<std::string>& texts, std::vector<double> omega_r, std::vector<double> omega_s,
                const Pooling& pooling = Pooling::mean(), double threshold = kDefaultRetrieverThreshold) {
    EmMetric em;
    TokenF1Metric f1;
    std::vector<SimilarityMetric*> metrics{&em, &f1};
    metrics.resize(omega_s.size());
    const auto tensor = build_similarity_tensor(texts, metrics);
    std::vector<CandidateAnswer> answers;
    for (std::size_t i = 0; i < texts.size(); ++i) answers.emplace_back(static_cast<int>(i), texts[i]);
    return voter_scores(answers, tensor, SimWeights{std::move(omega_s)}, RetrieverWeights{std::move(omega_r), threshold},
                        pooling);
}

}  // namespace

TEST_SUITE("similarity") {

TEST_CASE("em examples") {
    CHECK(em_similarity("Paris", "paris.") == 1.0);
    CHECK(em_similarity("Paris", "London") == 0.0);
    CHECK(em_similarity("the Eiffel Tower", "Eiffel tower") == 1.0);
}

TEST_CASE("token f1 examples") {
    CHECK(token_f1("one two", "one two") == 1.0);
    CHECK(token_f1("one two", "three four") == 0.0);
    CHECK(token_f1("x b c", "b c d") == doctest::Approx(2.0 / 3.0));
    CHECK(token_f1("", "") == 1.0);
    CHECK(token_f1("", "x") == 0.0);
    CHECK(token_f1("x x y", "x") == doctest::Approx(0.5));  // precision 1, recall 1/3
}

TEST_CASE("external similarity clamps and warns") {
    auto t = std::make_shared<test::FakeTransport>([](const std::string&, const json& body) {
        const auto a = body.at("text_a").get<std::string>();
        if (a == "high") return json{{"score", 1.3}};
        if (a == "low") return json{{"score", -0.2}};
        if (a == body.at("text_b")) return json{{"score", 0.9}};
        return json{{"score", 0.42}};
    });
    auto client = std::make_shared<ScorerClient>(Mode::Live, std::make_shared<ScoreStore>(), t,
                                                 Endpoint{"http://scorer.invalid", ""});
    std::vector<std::string> warnings;
    WarningSink warn = [&](const std::string& w) { warnings.push_back(w); };
    CHECK(external_similarity("high", "x", "bertscore", *client, warn) == 1.0);
    CHECK(external_similarity("low", "x", "bertscore", *client, warn) == 0.0);
    CHECK(warnings.size() == 2);
    CHECK(external_similarity("a", "b", "bertscore", *client, warn) == doctest::Approx(0.42));
    CHECK(warnings.size() == 2);
    CHECK(external_similarity("same", "same", "bertscore", *client, warn) == doctest::Approx(0.9));
    CHECK(warnings.size() == 3);

    auto metric = make_metric("nli_entail", client);
    CHECK_FALSE(metric->symmetric());
    CHECK(make_metric("bertscore", client)->symmetric());
    CHECK_THROWS_AS(make_metric("bertscore"), Error);
}

TEST_CASE("weighted similarity examples") {
    PairwiseSimilarityTensor t(2, 3);
    t.set(0, 1, 0, 1.0);
    t.set(0, 1, 1, 0.3);
    t.set(0, 1, 2, 0.7);
    CHECK(weighted_similarity(0, 1, t, SimWeights{{1, 0, 0}}) == 1.0);
    CHECK(weighted_similarity(0, 1, t, SimWeights{{0, 0, 0}}) == 0.0);
    PairwiseSimilarityTensor u(2, 2);
    u.set(0, 1, 0, 1.0);
    u.set(0, 1, 1, 0.6);
    CHECK(weighted_similarity(0, 1, u, SimWeights{{0.5, 0.5}}) == doctest::Approx(0.8));
    CHECK_THROWS_AS(weighted_similarity(0, 1, u, SimWeights{{0.5}}), Error);
    CHECK_THROWS_AS(u.at(1, 1, 0), Error);
    CHECK_THROWS_AS(u.set(0, 1, 0, 1.5), Error);
}

TEST_CASE("symmetric metrics give symmetric weighted similarity") {
    EmMetric em;
    TokenF1Metric f1;
    std::vector<SimilarityMetric*> metrics{&em, &f1};
    const std::vector<std::string> answers{"red fox", "the red fox", "blue fox jumps", "fox"};
    const auto t = build_similarity_tensor(answers, metrics);
    const SimWeights w{{0.3, 0.55}};
    for (std::size_t m = 0; m < 4; ++m) {
        for (std::size_t n = 0; n < 4; ++n) {
            if (m != n) CHECK(weighted_similarity(m, n, t, w) == weighted_similarity(n, m, t, w));
        }
    }
}

TEST_CASE("pooling examples") {
    const std::vector<double> a{0.2, 0.4, 0.6};
    CHECK(pool(a, Pooling::mean()) == doctest::Approx(0.4));
    const std::vector<double> b{0.9, 0.1, 0.8};
    CHECK(pool(b, Pooling::majority(0.5)) == 1.0);
    const std::vector<double> c{0.9, 0.1, 0.2};
    CHECK(pool(c, Pooling::majority(0.5)) == 0.0);
    const std::vector<double> d{0.3};
    CHECK(pool(d, Pooling::max()) == doctest::Approx(0.3));
    CHECK_THROWS_AS(pool(std::vector<double>{}, Pooling::mean()), Error);
    CHECK_THROWS_AS(pool(d, Pooling::plurality()), Error);
    CHECK_THROWS_AS(Pooling::majority(1.0), Error);
    CHECK_THROWS_AS(Pooling::plurality(0.0), Error);
    CHECK(to_string(pooling_from_string("majority:0.5")) == "majority:0.5");
    CHECK(pooling_from_string("max").kind == Pooling::Kind::Max);
    CHECK_THROWS_AS(pooling_from_string("median"), Error);
}

TEST_CASE("voter examples") {
    const auto r1 = vote({"Paris", "paris"}, {0.5, 0.4}, {1.0});
    CHECK(r1.scores[0] == doctest::Approx(0.5));
    CHECK(r1.scores[1] == doctest::Approx(0.4));
    CHECK(r1.winner == 0);

    const auto r2 = vote({"London", "Paris", "Paris", "Rome"}, {0.05, 0.5, 0.5, 0.5}, {1.0});
    CHECK(r2.excluded[0]);
    CHECK(r2.scores[0] == 0.0);
    CHECK(r2.scores[1] == doctest::Approx(0.25));  // peers 2 and 3 only
    CHECK(r2.winner == 1);

    const auto r3 = vote({"A", "A", "B"}, {0.3, 0.3, 0.3}, {1.0});
    CHECK(r3.scores[0] > r3.scores[2]);
    CHECK(r3.scores[1] > r3.scores[2]);
    CHECK(r3.winner == 0);
}

TEST_CASE("filtered retrievers do not influence peers") {
    const auto with = vote({"x", "y", "y"}, {0.5, 0.05, 0.4}, {1.0});
    const auto without = vote({"x", "z", "y"}, {0.5, 0.05, 0.4}, {1.0});
    CHECK(with.scores == without.scores);
}

TEST_CASE("lone active retriever, ties and all-filtered") {
    const auto lone = vote({"a", "b", "c"}, {0.0, 0.5, 0.0}, {1.0});
    CHECK(lone.winner == 1);
    CHECK(lone.scores[1] == doctest::Approx(0.5));
    const auto tie = vote({"a", "b"}, {0.4, 0.4}, {1.0});
    CHECK(tie.winner == 0);
    CHECK_THROWS_AS(vote({"a", "b"}, {0.05, 0.1}, {1.0}), NoActiveRetriever);
}

TEST_CASE("plurality picks the largest equivalence class") {
    const auto r = vote({"a", "b", "b", "c", "c", "c"}, {0.3, 0.3, 0.3, 0.3, 0.3, 0.3}, {1.0},
                        Pooling::plurality(0.5));
    CHECK(r.winner == 3);
    CHECK(r.scores[1] == 0.0);
    CHECK(r.scores[3] == doctest::Approx(0.3));
}

TEST_CASE("scale covariance and permutation equivariance") {
    std::mt19937 rng(3);
    const std::vector<std::string> pool_words{"paris", "london", "the paris", "rome city", "rome"};
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 2 + rng() % 4;
        std::vector<std::string> texts(m);
        std::vector<double> w(m);
        for (std::size_t i = 0; i < m; ++i) {
            texts[i] = pool_words[rng() % pool_words.size()];
            w[i] = 0.11 + 0.24 * (rng() % 1000) / 1000.0;
        }
        const std::vector<double> ws{0.4, 0.2};
        const auto base = vote(texts, w, ws);

        auto scaled_w = w;
        for (auto& v : scaled_w) v *= 1.7;
        const auto scaled = vote(texts, scaled_w, ws);
        for (std::size_t i = 0; i < m; ++i) CHECK(scaled.scores[i] == doctest::Approx(1.7 * base.scores[i]));
        CHECK(scaled.winner == base.winner);

        std::vector<std::size_t> perm(m);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::string> pt(m);
        std::vector<double> pw(m);
        for (std::size_t i = 0; i < m; ++i) {
            pt[i] = texts[perm[i]];
            pw[i] = w[perm[i]];
        }
        const auto permuted = vote(pt, pw, ws);
        for (std::size_t i = 0; i < m; ++i) CHECK(permuted.scores[i] == doctest::Approx(base.scores[perm[i]]));
        CHECK(permuted.scores[permuted.winner] == doctest::Approx(base.scores[base.winner]));
        const auto top = base.scores[base.winner];
        if (std::count_if(base.scores.begin(), base.scores.end(), [&](double v) { return v == top; }) == 1) {
            CHECK(pt[permuted.winner] == texts[base.winner]);
        }
    }
}

TEST_CASE("a strict majority answer wins under em and mean pooling") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 3 + rng() % 6;
        const std::size_t majority = m / 2 + 1;
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < majority; ++i) texts.push_back("gold");
        for (std::size_t i = majority; i < m; ++i) texts.push_back("wrong" + std::to_string(rng() % 3));
        std::shuffle(texts.begin(), texts.end(), rng);
        const auto r = vote(texts, std::vector<double>(m, 0.3), {1.0});
        CHECK(texts[r.winner] == "gold");
    }
}

TEST_CASE("vote_winner agrees with voter_scores") {
    const std::vector<std::string> texts{"a b", "a", "b c", "a b"};
    EmMetric em;
    TokenF1Metric f1;
    std::vector<SimilarityMetric*> metrics{&em, &f1};
    const auto t = build_similarity_tensor(texts, metrics);
    const std::vector<double> eff{0.3, 0.0, 0.5, 0.2};
    const std::vector<double> ws{0.1, 0.6};
    std::vector<double> scratch(8);
    const int w = vote_winner(t.raw(), 4, 2, eff, ws, Pooling::mean(), scratch);
    const auto r = vote(texts, {0.3, 0.0, 0.5, 0.2}, ws);
    CHECK(w == static_cast<int>(r.winner));
    const std::vector<double> none(4, 0.0);
    CHECK(vote_winner(t.raw(), 4, 2, none, ws, Pooling::mean(), scratch) == -1);
}

}
