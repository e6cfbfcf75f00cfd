#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "reprosamp/binomial.hpp"
#include "reprosamp/borel.hpp"
#include "reprosamp/confidence_set.hpp"
#include "reprosamp/engine.hpp"
#include "reprosamp/neyman.hpp"
#include "reprosamp/rng.hpp"
#include "support.hpp"

using namespace reprosamp;
using Catch::Approx;
using testsupport::for_all;
using testsupport::Gen;

namespace {

std::size_t count_inside(const BorelRegion& r, const std::vector<double>& v)
{
    return static_cast<std::size_t>(
        std::count_if(v.begin(), v.end(), [&](double x) { return contains(r, std::vector<double>{x}); }));
}

const BorelInterval& as_interval(const BorelRegion& r)
{
    return std::get<BorelInterval>(r.kind);
}

// Y_i = theta + U_i with standard normal noise; T(u, theta) = mean(u).
struct NormalMean {
    std::size_t n = 5;
    GenerativeModel model;
    NuclearMapping T;
    Matcher matcher;

    explicit NormalMean(BoxGrid grid, std::size_t n_obs = 5) : n(n_obs)
    {
        model.theta_space = std::move(grid);
        model.noise_dim = n;
        model.sample_noise = [this](RngStream& r) { return r.normal_vector(n); };
        model.generate = [](const Theta& th, std::span<const double> u) {
            Vector y(u.begin(), u.end());
            for (double& v : y) v += th[0];
            return y;
        };
        T.dim = 1;
        T.eval = [](std::span<const double> u, const Theta&) {
            return Vector{std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size())};
        };
        matcher = [](const Theta& th, std::span<const double> y) -> std::optional<std::vector<Vector>> {
            const double m = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
            return std::vector<Vector>{{m - th[0]}};
        };
    }
};

bool union_subset(const RealUnion& a, const RealUnion& b)
{
    for (const auto& i : a.intervals())
        if (!b.contains(i.lo) || !b.contains(i.hi)) return false;
    return true;
}

// Exhaustive (i, j) window search with smallest width, largest mass, smallest i.
std::pair<int, int> brute_window(int r, double theta, double alpha)
{
    const auto pmf = binomial::binomial_pmf(r, theta);
    int bi = -1, bj = -1;
    double bmass = -1;
    for (int i = 0; i <= r; ++i) {
        double mass = 0;
        for (int j = i; j <= r; ++j) {
            mass += pmf[j];
            if (mass < alpha - 1e-12) continue;
            const bool shorter = bi < 0 || j - i < bj - bi;
            const bool same = bi >= 0 && j - i == bj - bi && mass > bmass * (1 + 1e-12);
            if (shorter || same) {
                bi = i;
                bj = j;
                bmass = mass;
            }
            break;
        }
    }
    return {bi, bj};
}

}  // namespace

TEST_CASE("rng streams are reproducible and distinct", "[rng]")
{
    RngStream a(42, 7), b(42, 7), c(42, 8);
    std::vector<std::uint64_t> va, vb, vc;
    for (int i = 0; i < 16; ++i) {
        va.push_back(a());
        vb.push_back(b());
        vc.push_back(c());
    }
    CHECK(va == vb);
    CHECK(va != vc);
    CHECK(RngStream(1, 0).derive(3)() == RngStream(1, 0).derive(3)());
    CHECK(RngStream(1, 0).derive(3)() != RngStream(1, 0).derive(4)());
    CHECK(RngStream(1, 0).derive(3)() != RngStream(2, 0).derive(3)());
}

TEST_CASE("derived streams are uncorrelated", "[rng]")
{
    RngStream base(99, 0);
    auto x = base.derive(1).normal_vector(20000);
    auto y = base.derive(2).normal_vector(20000);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
    }
    // |r| < 4 / sqrt(N) under independence
    CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 4.0 / std::sqrt(20000.0));
}

TEST_CASE("hash_doubles folds signed zero", "[rng]")
{
    std::vector<double> a{0.0, 1.5}, b{-0.0, 1.5}, c{1.5, 0.0};
    CHECK(hash_doubles(a) == hash_doubles(b));
    CHECK(hash_doubles(a) != hash_doubles(c));
}

TEST_CASE("RealUnion merges and sorts", "[sets]")
{
    RealUnion u({Interval::closed(3, 4), Interval::closed(0, 1), Interval::closed(1, 2), Interval::open(5, 5)});
    REQUIRE(u.intervals().size() == 2);
    CHECK(u.intervals()[0] == Interval::closed(0, 2));
    CHECK(u.intervals()[1] == Interval::closed(3, 4));
    CHECK(u.length() == Approx(3.0));

    RealUnion gap({Interval::open(0, 1), Interval::open(1, 2)});
    CHECK(gap.intervals().size() == 2);
    CHECK_FALSE(gap.contains(1.0));
    RealUnion joined({Interval{0, 1, false, true}, Interval::open(1, 2)});
    CHECK(joined.intervals().size() == 1);
}

TEST_CASE("DiscreteSet removes duplicates", "[sets]")
{
    DiscreteSet d({{3}, {1}, {3}, {2}});
    CHECK(d.size() == 3);
    CHECK(d.values().front() == ParamValue{1});
    CHECK(d.contains({2}));
    CHECK_FALSE(d.contains({4}));
}

TEST_CASE("ConfidenceSet JSON round trip", "[sets]")
{
    SECTION("real union with infinite bound")
    {
        SetMeta meta{17, 300, 0.001, {"note"}};
        auto set = make_real_set(0.9, RealUnion({Interval{-kInf, 1.5, false, true}, Interval::closed(2, 3)}), meta);
        const auto j = to_json(set);
        CHECK(j["intervals"][0]["lo"].is_null());
        CHECK(j["kind"] == "real_union");
        CHECK(confidence_set_from_json(j) == set);
    }
    SECTION("discrete")
    {
        ConfidenceSet set{0.95, DiscreteSet({{2}, {3}, {4}}), {}};
        CHECK(confidence_set_from_json(to_json(set)) == set);
        CHECK(to_json(set)["values"] == nlohmann::json::array({2.0, 3.0, 4.0}));
    }
    SECTION("product")
    {
        ProductSet p;
        p.entries.emplace_back(ParamValue{3}, RealUnion({Interval::closed(0.1, 0.2)}));
        ConfidenceSet set{0.95, p, {}};
        CHECK(confidence_set_from_json(to_json(set)) == set);
    }
    SECTION("empty set carries a warning")
    {
        auto set = make_real_set(0.95, RealUnion({Interval::open(1, 1)}));
        CHECK(set.empty());
        CHECK(set.has_warning("empty confidence set"));
    }
}

TEST_CASE("borel_interval_from_samples examples", "[borel]")
{
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    const auto r = borel_interval_from_samples(v, 0.90, IntervalMode::equal_tail);
    CHECK(as_interval(r).lo == 6.0);
    CHECK(as_interval(r).hi == 95.0);
    CHECK(count_inside(r, v) == 90);

    std::vector<double> fives(40, 5.0);
    const auto f = borel_interval_from_samples(fives, 0.95);
    CHECK(as_interval(f).lo == 5.0);
    CHECK(as_interval(f).hi == 5.0);

    RngStream rng(5, 0);
    const auto z = rng.normal_vector(10000);
    const auto nz = borel_interval_from_samples(z, 0.95);
    const double q = boost::math::quantile(boost::math::normal(), 0.975);
    CHECK(std::abs(as_interval(nz).lo + q) < 0.1);
    CHECK(std::abs(as_interval(nz).hi - q) < 0.1);
}

TEST_CASE("borel_interval_from_samples errors", "[borel]")
{
    std::vector<double> none;
    std::vector<double> one{1.0};
    CHECK_THROWS_WITH(borel_interval_from_samples(none, 0.9), "no samples");
    CHECK_THROWS_WITH(borel_interval_from_samples(one, 1.0), "invalid level");
    CHECK_THROWS_WITH(borel_interval_from_samples(one, 0.0), "invalid level");
}

TEST_CASE("property: Borel intervals hold at least ceil(alpha N) inputs", "[borel][property]")
{
    for_all(300, 11, [](Gen& g) {
        const auto n = static_cast<std::size_t>(g.integer(1, 200));
        const double alpha = g.level();
        const auto v = g.coin() ? g.normals(n) : g.tied(n, g.integer(1, 6));
        const std::size_t need = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
        for (auto mode : {IntervalMode::equal_tail, IntervalMode::shortest}) {
            const auto r = borel_interval_from_samples(v, alpha, mode);
            CHECK(as_interval(r).lo <= as_interval(r).hi);
            CHECK(count_inside(r, v) >= need);
        }
    });
}

TEST_CASE("property: shortest mode is the minimal window of the required count", "[borel][property]")
{
    for_all(200, 12, [](Gen& g) {
        const auto n = static_cast<std::size_t>(g.integer(1, 80));
        const double alpha = g.level();
        auto v = g.normals(n);
        const auto r = borel_interval_from_samples(v, alpha, IntervalMode::shortest);
        const auto e = borel_interval_from_samples(v, alpha, IntervalMode::equal_tail);
        std::sort(v.begin(), v.end());
        const std::size_t k = required_count(alpha, n);
        double best = kInf;
        for (std::size_t i = 0; i + k <= n; ++i) best = std::min(best, v[i + k - 1] - v[i]);
        CHECK(as_interval(r).hi - as_interval(r).lo == best);
        CHECK(as_interval(r).hi - as_interval(r).lo <= as_interval(e).hi - as_interval(e).lo);
    });
}

TEST_CASE("depth_central_region examples", "[borel][depth]")
{
    SECTION("one dimension reduces to a two-sided rank region")
    {
        std::vector<Vector> pts;
        for (int i = 1; i <= 100; ++i) pts.push_back({static_cast<double>(i)});
        const auto region = depth_central_region(pts, 0.95);
        std::vector<int> inside;
        for (int i = 1; i <= 100; ++i)
            if (contains(region, std::vector<double>{static_cast<double>(i)})) inside.push_back(i);
        // the 4 outermost ranks fall below the 5th smallest depth
        REQUIRE(inside.size() == 96);
        CHECK(inside.front() == 3);
        CHECK(inside.back() == 98);
        CHECK(contains(region, std::vector<double>{50.5}));
        CHECK_FALSE(contains(region, std::vector<double>{0.0}));
    }
    SECTION("identical points give the single point")
    {
        std::vector<Vector> pts(10, Vector{1.0, 2.0});
        const auto region = depth_central_region(pts, 0.9);
        CHECK(contains(region, std::vector<double>{1.0, 2.0}));
        CHECK_FALSE(contains(region, std::vector<double>{1.0, 2.0 + 1e-9}));
    }
    SECTION("two dimensions hold about alpha of the points")
    {
        RngStream rng(8, 0);
        std::vector<Vector> pts;
        for (int i = 0; i < 5000; ++i) pts.push_back(rng.normal_vector(2));
        const auto region = depth_central_region(pts, 0.95);
        std::size_t in = 0;
        for (const auto& p : pts) in += contains(region, p);
        const double frac = static_cast<double>(in) / 5000.0;
        CHECK(frac >= 0.94);
        CHECK(frac <= 0.96);
    }
    SECTION("threshold is attained by a reference point")
    {
        RngStream rng(9, 0);
        std::vector<Vector> pts;
        for (int i = 0; i < 200; ++i) pts.push_back(rng.normal_vector(3));
        const auto region = depth_central_region(pts, 0.8);
        const auto& dr = std::get<DepthRegion>(region.kind);
        bool attained = false;
        for (const auto& p : pts) attained = attained || dr.depth(p) == dr.depth_threshold;
        CHECK(attained);
    }
}

TEST_CASE("depth_central_region errors", "[borel][depth]")
{
    std::vector<Vector> bad{{0, 0}, {1, 1}, {std::nan(""), 0}, {2, 1}};
    CHECK_THROWS_WITH(depth_central_region(bad, 0.9), "degenerate point cloud");
    std::vector<Vector> few{{0, 0}, {1, 1}, {2, 0}};
    CHECK_THROWS(depth_central_region(few, 0.9));
}

TEST_CASE("contains examples", "[borel]")
{
    const BorelRegion unit{0.95, BorelInterval{0.0, 1.0}};
    CHECK(contains(unit, std::vector<double>{0.5}));
    CHECK(contains(unit, std::vector<double>{1.0}));
    CHECK(contains(unit, std::vector<double>{0.0}));
    CHECK_FALSE(contains(unit, std::vector<double>{1.0000001}));
    CHECK_THROWS(contains(unit, std::vector<double>{0.5, 0.5}));

    std::vector<Vector> pts{{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    const auto region = depth_central_region(pts, 0.8);
    CHECK_FALSE(contains(region, std::vector<double>{10, 10}));
    CHECK(contains(region, std::vector<double>{0, 0}));
    CHECK_THROWS(contains(region, std::vector<double>{0.0}));
}

TEST_CASE("Algorithm 1 on the binomial model matches the closed form", "[engine]")
{
    const int r = 20;
    const int y_obs = 8;
    const double alpha = 0.95;
    GenerativeModel model;
    model.theta_space = BoxGrid{{0.001}, {0.999}, 998};
    model.noise_dim = r;
    model.sample_noise = [](RngStream& s) {
        Vector u(20);
        for (double& v : u) v = s.uniform();
        return u;
    };
    model.generate = [](const Theta& th, std::span<const double> u) {
        double c = 0;
        for (double v : u) c += v <= th[0];
        return Vector{c};
    };
    NuclearMapping T{1, [](std::span<const double> u, const Theta& th) {
                         double c = 0;
                         for (double v : u) c += v <= th[0];
                         return Vector{c};
                     }};
    // any theta in (0, 1) can reproduce y_obs, and then T(u*, theta) = y_obs
    Matcher matcher = [](const Theta&, std::span<const double> y) -> std::optional<std::vector<Vector>> {
        return std::vector<Vector>{{y[0]}};
    };
    AlgorithmOptions opts;
    opts.alpha = alpha;
    opts.exact_region = [r](const Theta& th, double a) {
        const auto acc = binomial::shortest_binomial_acceptance(r, th[0], a);
        return BorelRegion{a, BorelInterval{double(acc.a_lower), double(acc.a_upper)}};
    };
    const std::vector<double> y{static_cast<double>(y_obs)};
    const auto set = confidence_set_algorithm1(model, T, y, opts, RngStream(1, 0), matcher);
    const auto axis = std::get<BoxGrid>(model.theta_space).axis(0);
    std::size_t agree = 0;
    for (double th : axis) agree += set.real_union().contains(th) == binomial::repro_contains(y_obs, r, alpha, th);
    CHECK(agree == axis.size());
    CHECK(set.real_union().intervals().size() == 1);
}

TEST_CASE("Algorithm 1 reproduces the uniform-location repro interval", "[engine]")
{
    const std::vector<double> y{-0.430, 0.049, 0.371};
    const double alpha = 0.95;
    GenerativeModel model;
    model.theta_space = BoxGrid::with_step({-1.0}, {1.0}, 0.0005);
    model.noise_dim = 3;
    model.sample_noise = [](RngStream& s) {
        Vector u(3);
        for (double& v : u) v = 2 * s.uniform() - 1;
        return u;
    };
    model.generate = [](const Theta& th, std::span<const double> u) {
        Vector out(u.begin(), u.end());
        for (double& v : out) v += th[0];
        return out;
    };
    NuclearMapping T{1, [](std::span<const double> u, const Theta&) {
                         return Vector{std::accumulate(u.begin(), u.end(), 0.0) / 3.0};
                     }};
    Matcher matcher = [](const Theta& th, std::span<const double> yy) -> std::optional<std::vector<Vector>> {
        double m = 0;
        for (double v : yy) {
            if (std::abs(v - th[0]) >= 1.0) return std::nullopt;
            m += v - th[0];
        }
        return std::vector<Vector>{{m / 3.0}};
    };
    AlgorithmOptions opts;
    opts.alpha = alpha;
    opts.exact_region = [](const Theta&, double a) {
        const double h = 2.0 * neyman::irwin_hall_quantile(3, 0.5 + a / 2.0) / 3.0 - 1.0;
        return BorelRegion{a, BorelInterval{-h, h}};
    };
    const auto set = confidence_set_algorithm1(model, T, y, opts, RngStream(1, 0), matcher);
    REQUIRE(set.real_union().intervals().size() == 1);
    CHECK(set.real_union().lower() == Approx(-0.629).margin(0.001));
    CHECK(set.real_union().upper() == Approx(0.570).margin(0.001));
}

TEST_CASE("Algorithm 1 degenerate model returns the observed point", "[engine]")
{
    GenerativeModel model;
    model.theta_space = BoxGrid{{0.0}, {1.0}, 10};
    model.sample_noise = [](RngStream&) { return Vector{0.0}; };
    model.generate = [](const Theta& th, std::span<const double>) { return Vector{th[0]}; };
    NuclearMapping T{1, [](std::span<const double>, const Theta&) { return Vector{0.0}; }};
    Matcher matcher = [](const Theta& th, std::span<const double> y) -> std::optional<std::vector<Vector>> {
        if (th[0] != y[0]) return std::nullopt;
        return std::vector<Vector>{{0.0}};
    };
    const std::vector<double> y{0.3};
    const auto set = confidence_set_algorithm1(model, T, y, {}, RngStream(1, 0), matcher);
    REQUIRE(set.real_union().intervals().size() == 1);
    CHECK(set.real_union().intervals()[0] == Interval::closed(0.3, 0.3));
}

TEST_CASE("Algorithm 1 errors and empty results", "[engine]")
{
    NormalMean nm(BoxGrid{{-1.0}, {1.0}, 20});
    const std::vector<double> y{0.1, 0.2, 0.0, -0.1, 0.3};
    SECTION("continuous box without grid")
    {
        nm.model.theta_space = ContinuousBox{{-1.0}, {1.0}};
        CHECK_THROWS_WITH(confidence_set_algorithm1(nm.model, nm.T, y, {}, RngStream(1, 0), nm.matcher),
                          "grid required");
    }
    SECTION("matcher never succeeds")
    {
        Matcher never = [](const Theta&, std::span<const double>) -> std::optional<std::vector<Vector>> {
            return std::nullopt;
        };
        AlgorithmOptions opts;
        opts.n_mc = 50;
        const auto set = confidence_set_algorithm1(nm.model, nm.T, y, opts, RngStream(1, 0), never);
        CHECK(set.empty());
        CHECK(set.has_warning("empty confidence set"));
    }
}

TEST_CASE("Algorithm 1 output kinds follow the parameter space", "[engine]")
{
    NormalMean nm(BoxGrid{{-1.0}, {1.0}, 20});
    const std::vector<double> y{0.1, 0.2, 0.0, -0.1, 0.3};
    AlgorithmOptions opts;
    opts.n_mc = 200;
    nm.model.theta_space = FiniteSet{{{-2.0}, {0.0}, {0.1}, {2.0}}};
    const auto d = confidence_set_algorithm1(nm.model, nm.T, y, opts, RngStream(1, 0), nm.matcher);
    CHECK(d.kind() == "discrete");
    CHECK(d.discrete().contains({0.1}));
    CHECK_FALSE(d.discrete().contains({2.0}));

    nm.model.theta_space = ProductSpace{FiniteSet{{{0.0}, {1.0}}}, BoxGrid{{-1.0}, {1.0}, 20}};
    nm.model.generate = [](const Theta& th, std::span<const double> u) {
        Vector out(u.begin(), u.end());
        for (double& v : out) v += th[1];
        return out;
    };
    nm.matcher = [](const Theta& th, std::span<const double> yy) -> std::optional<std::vector<Vector>> {
        const double m = std::accumulate(yy.begin(), yy.end(), 0.0) / static_cast<double>(yy.size());
        return std::vector<Vector>{{m - th[1]}};
    };
    const auto p = confidence_set_algorithm1(nm.model, nm.T, y, opts, RngStream(1, 0), nm.matcher);
    CHECK(p.kind() == "product");
    CHECK(p.product().entries.size() == 2);
    CHECK(p.product().contains({0.0}, 0.1));
}

TEST_CASE("Algorithm 1 is deterministic and nested in alpha", "[engine][property]")
{
    NormalMean nm(BoxGrid::with_step({-3.0}, {3.0}, 0.01));
    for_all(6, 21, [&](Gen& g) {
        const auto y = g.normals(5, g.real(-1, 1));
        AlgorithmOptions lo_opts, hi_opts;
        lo_opts.n_mc = hi_opts.n_mc = 300;
        lo_opts.alpha = g.real(0.3, 0.7);
        hi_opts.alpha = g.real(0.75, 0.99);
        const RngStream rng(g.integer(0, 1000), 0);
        const auto a = confidence_set_algorithm1(nm.model, nm.T, y, lo_opts, rng, nm.matcher);
        const auto a2 = confidence_set_algorithm1(nm.model, nm.T, y, lo_opts, rng, nm.matcher);
        const auto b = confidence_set_algorithm1(nm.model, nm.T, y, hi_opts, rng, nm.matcher);
        CHECK(a == a2);
        CHECK(union_subset(a.real_union(), b.real_union()));
    });
}

TEST_CASE("Algorithm 1 calibration dominance", "[engine][property]")
{
    NormalMean nm(BoxGrid{{0.0}, {0.0}, 1}, 4);
    const std::size_t reps = 1000;
    for (double alpha : {0.5, 0.9, 0.95}) {
        AlgorithmOptions opts;
        opts.alpha = alpha;
        opts.n_mc = 400;
        std::size_t hits = 0;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            RngStream data(31, rep);
            const auto y = nm.model.generate({0.0}, nm.model.sample_noise(data));
            hits += theta_accepted(nm.model, nm.T, y, {0.0}, opts, RngStream(32, rep), nm.matcher);
        }
        INFO("alpha " << alpha);
        CHECK(static_cast<double>(hits) / reps >= alpha - testsupport::mc_slack(alpha, reps));
    }
}

TEST_CASE("repro_pvalue examples", "[engine][pvalue]")
{
    NormalMean nm(BoxGrid{{0.0}, {0.0}, 1});
    const std::vector<double> y{0.0, 0.1, -0.1, 0.05, -0.05};
    std::vector<double> grid;
    for (int i = 1; i <= 999; ++i) grid.push_back(i / 1000.0);
    PValueOptions opts;
    opts.n_mc = 2000;
    const RngStream rng(3, 0);

    SECTION("theta inside the 1% set gives p >= 0.99")
    {
        AlgorithmOptions a;
        a.alpha = 0.01;
        a.n_mc = 2000;
        REQUIRE(theta_accepted(nm.model, nm.T, y, {0.0}, a, rng, nm.matcher));
        CHECK(repro_pvalue(nm.model, nm.T, y, {{0.0}}, grid, opts, rng, nm.matcher) >= 0.99);
    }
    SECTION("theta outside the 99.9% set gives p <= 0.001")
    {
        AlgorithmOptions a;
        a.alpha = 0.999;
        a.n_mc = 2000;
        REQUIRE_FALSE(theta_accepted(nm.model, nm.T, y, {5.0}, a, rng, nm.matcher));
        CHECK(repro_pvalue(nm.model, nm.T, y, {{5.0}}, grid, opts, rng, nm.matcher) <= 0.001);
    }
    SECTION("empty theta0 set")
    {
        CHECK_THROWS(repro_pvalue(nm.model, nm.T, y, {}, grid, opts, rng, nm.matcher));
    }
}

TEST_CASE("repro_pvalue for the binomial example agrees with exhaustive windows", "[engine][pvalue]")
{
    GenerativeModel model;
    model.theta_space = FiniteSet{{{0.4}}};
    NuclearMapping T{1, [](std::span<const double>, const Theta&) { return Vector{0.0}; }};
    Matcher matcher = [](const Theta&, std::span<const double> y) -> std::optional<std::vector<Vector>> {
        return std::vector<Vector>{{y[0]}};
    };
    PValueOptions opts;
    opts.exact_region = [](const Theta& th, double a) {
        const auto acc = binomial::shortest_binomial_acceptance(20, th[0], a);
        return BorelRegion{a, BorelInterval{double(acc.a_lower), double(acc.a_upper)}};
    };
    std::vector<double> grid;
    for (int i = 1; i <= 999; ++i) grid.push_back(i / 1000.0);
    const std::vector<double> y{8.0};
    const double p = repro_pvalue(model, T, y, {{0.4}}, grid, opts, RngStream(1, 0), matcher);
    double oracle = 1.0;
    for (double a : grid) {
        const auto [i, j] = brute_window(20, 0.4, a);
        if (i <= 8 && 8 <= j) {
            oracle = 1.0 - a;
            break;
        }
    }
    CHECK(p == Approx(oracle));
    CHECK(p > 0.05);
}

TEST_CASE("property: p-value does not increase as theta0 set shrinks", "[engine][pvalue][property]")
{
    NormalMean nm(BoxGrid{{0.0}, {0.0}, 1});
    std::vector<double> grid;
    for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
    PValueOptions opts;
    opts.n_mc = 300;
    for_all(20, 41, [&](Gen& g) {
        const auto y = g.normals(5, g.real(-0.5, 0.5));
        std::vector<Theta> big;
        for (int k = 0; k < 5; ++k) big.push_back({g.real(-2, 2)});
        std::vector<Theta> small(big.begin(), big.begin() + g.integer(1, 4));
        const RngStream rng(g.integer(0, 100), 0);
        CHECK(repro_pvalue(nm.model, nm.T, y, small, grid, opts, rng, nm.matcher) <=
              repro_pvalue(nm.model, nm.T, y, big, grid, opts, rng, nm.matcher));
    });
}

namespace {

// Y_i = eta + beta * U_i, theta = (eta, beta); T_a = (mean u, log sd u).
struct ScaleModel {
    GenerativeModel model;
    NuclearMapping T;
    Inverter inverter;

    ScaleModel()
    {
        model.noise_dim = 6;
        model.sample_noise = [](RngStream& r) { return r.normal_vector(6); };
        model.generate = [](const Theta& th, std::span<const double> u) {
            Vector y(u.size());
            for (std::size_t i = 0; i < u.size(); ++i) y[i] = th[0] + th[1] * u[i];
            return y;
        };
        T.dim = 2;
        T.eval = [](std::span<const double> u, const Theta&) {
            const double m = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size());
            double ss = 0;
            for (double v : u) ss += (v - m) * (v - m);
            return Vector{m, 0.5 * std::log(ss / static_cast<double>(u.size() - 1))};
        };
        inverter = [](const Theta& th, std::span<const double> y) {
            if (!(th[1] > 0)) return std::vector<Vector>{};
            Vector u(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) u[i] = (y[i] - th[0]) / th[1];
            return std::vector<Vector>{u};
        };
    }
};

}  // namespace

TEST_CASE("profile_nu at the identity nuisance is a direct depth evaluation", "[engine][profile]")
{
    ScaleModel sm;
    RngStream rng(5, 0);
    const auto u = rng.normal_vector(6);
    const Theta eta{0.5};
    const Vector beta{2.0};
    const RngStream mc(6, 0);
    const auto v = profile_nu(sm.model, sm.T, u, eta, beta, beta, 500, mc, sm.inverter);
    CHECK_FALSE(v.infeasible);

    const auto samples = simulate_nuclear(sm.model, sm.T, {0.5, 2.0}, 500, mc);
    const MahalanobisDepth depth(samples);
    const double d = depth(sm.T.eval(u, {0.5, 2.0}));
    double below = 0;
    for (const auto& s : samples) below += depth(s) <= d;
    CHECK(v.value == Approx(1.0 - below / 500.0));
}

TEST_CASE("profile_nu with an empty constraint set is 1", "[engine][profile]")
{
    ScaleModel sm;
    const auto u = RngStream(1, 0).normal_vector(6);
    const auto v = profile_nu(sm.model, sm.T, u, {0.0}, {1.0}, {-1.0}, 100, RngStream(2, 0), sm.inverter);
    CHECK(v.value == 1.0);
    CHECK(v.infeasible);
}

TEST_CASE("profile_nu is invariant to relabelled mixture components", "[engine][profile]")
{
    // theta = (mu_0, mu_1, label_1..label_n); the label-swapped theta yields identical data
    const std::size_t n = 8;
    GenerativeModel model;
    model.noise_dim = n;
    model.sample_noise = [n](RngStream& r) { return r.normal_vector(n); };
    model.generate = [n](const Theta& th, std::span<const double> u) {
        Vector y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = th[static_cast<std::size_t>(th[2 + i])] + u[i];
        return y;
    };
    NuclearMapping T{2, [](std::span<const double> u, const Theta&) {
                         double s = 0, ss = 0;
                         for (double v : u) {
                             s += v;
                             ss += v * v;
                         }
                         return Vector{s, ss};
                     }};
    Inverter inverter = [n](const Theta& th, std::span<const double> y) {
        Vector u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = y[i] - th[static_cast<std::size_t>(th[2 + i])];
        return std::vector<Vector>{u};
    };
    const Theta eta{};
    Vector beta{0.0, 3.0, 0, 0, 0, 0, 1, 1, 1, 1};
    Vector tilde{0.2, 2.5, 0, 1, 0, 0, 1, 1, 1, 1};
    Vector swapped{2.5, 0.2, 1, 0, 1, 1, 0, 0, 0, 0};
    const auto u = RngStream(3, 0).normal_vector(n);
    const auto a = profile_nu(model, T, u, eta, beta, tilde, 400, RngStream(4, 0), inverter);
    const auto b = profile_nu(model, T, u, eta, beta, swapped, 400, RngStream(4, 0), inverter);
    CHECK(a.value == b.value);
}

TEST_CASE("profile_nuclear takes the minimum over candidates", "[engine][profile]")
{
    ScaleModel sm;
    const auto u = RngStream(7, 0).normal_vector(6);
    const Theta eta{0.0};
    const Vector beta{1.0};
    const RngStream mc(8, 0);
    auto nu = [&](const Vector& bt) { return profile_nu(sm.model, sm.T, u, eta, beta, bt, 300, mc, sm.inverter); };

    const auto single = profile_nuclear(sm.model, sm.T, u, eta, beta, [](const Theta&) {
        return std::vector<Vector>{{1.0}};
    }, 300, mc, sm.inverter);
    CHECK(single.value == nu({1.0}).value);

    const auto two = profile_nuclear(sm.model, sm.T, u, eta, beta, [](const Theta&) {
        return std::vector<Vector>{{1.0}, {3.0}};
    }, 300, mc, sm.inverter);
    CHECK(two.value == std::min(nu({1.0}).value, nu({3.0}).value));

    CHECK_THROWS_WITH(profile_nuclear(sm.model, sm.T, u, eta, beta, [](const Theta&) {
        return std::vector<Vector>{};
    }, 300, mc, sm.inverter), "no candidates");
}

TEST_CASE("profile dominance at the true parameter", "[engine][profile][property]")
{
    ScaleModel sm;
    const Theta eta{0.0};
    const Vector beta{1.0};
    const std::size_t reps = 400;
    std::vector<double> values;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        const auto u = RngStream(50, rep).normal_vector(6);
        values.push_back(profile_nuclear(sm.model, sm.T, u, eta, beta, [](const Theta&) {
            return std::vector<Vector>{{0.5}, {1.0}, {2.0}};
        }, 300, RngStream(51, rep), sm.inverter).value);
    }
    for (double alpha : {0.1, 0.5, 0.9, 0.95}) {
        const double frac = static_cast<double>(std::count_if(values.begin(), values.end(),
                                                              [&](double v) { return v <= alpha; })) / reps;
        INFO("alpha " << alpha);
        CHECK(frac >= alpha - testsupport::mc_slack(alpha, reps));
    }
}
