#include <gtest/gtest.h>

#include <set>
#include <tuple>

#include "support.hpp"
#include "tmtcg/digest.hpp"
#include "tmtcg/kv_config.hpp"
#include "tmtcg/risk.hpp"
#include "tmtcg/threat_model.hpp"
#include "tmtcg/threat_xml.hpp"

using namespace tmtcg;
using namespace tmtcg::threat;

namespace {

DfdElement node(std::string id, ElementKind kind) {
    DfdElement e;
    e.id = std::move(id);
    e.name = e.id;
    e.kind = kind;
    return e;
}

DfdElement flow(std::string id, std::string from, std::string to) {
    DfdElement e = node(std::move(id), ElementKind::DataFlow);
    e.source_id = std::move(from);
    e.target_id = std::move(to);
    return e;
}

}  // namespace

TEST(Derivation, MatchesBruteForceOracle) {
    for (std::uint64_t i = 0; i < 300; ++i) {
        auto rng = Rng::split(7, i);
        const auto model = support::random_dfd(rng);
        ASSERT_TRUE(validate_dfd(model).empty()) << "case " << i;
        const auto templates = support::random_templates(rng);
        std::set<std::tuple<std::string, std::string, Category>> got;
        for (const auto& t : derive_threats(model, templates)) got.emplace(t.threat_id, t.element_id, t.category);
        EXPECT_EQ(got, support::oracle_threats(model, templates)) << "case " << i;
    }
}

TEST(Derivation, OutputSortedAndDeterministic) {
    auto rng = Rng::split(3, 0);
    const auto model = support::random_dfd(rng);
    const auto templates = support::random_templates(rng);
    const auto a = derive_threats(model, templates);
    EXPECT_EQ(a, derive_threats(model, templates));
    for (std::size_t i = 1; i < a.size(); ++i) {
        EXPECT_LE(std::tie(a[i - 1].element_id, a[i - 1].template_id), std::tie(a[i].element_id, a[i].template_id));
    }
}

TEST(Derivation, DemoModelYieldsStrideTable) {
    const auto threats = derive_threats(demo_model(), default_stride_templates());
    std::set<std::string> ids;
    for (const auto& t : threats) ids.insert(t.threat_id);
    // Process: all six; ExternalEntity: S, R; DataFlow: T, I, D.
    EXPECT_EQ(threats.size(), 11u);
    EXPECT_TRUE(ids.count("stride.denial_of_service@broker"));
    EXPECT_TRUE(ids.count("stride.spoofing@client"));
    EXPECT_FALSE(ids.count("stride.spoofing@flow"));
    for (const auto& t : threats) EXPECT_EQ(t.title.find("{element}"), std::string::npos);
}

TEST(Derivation, TitleUsesNameOrIdFallback) {
    DfdModel m;
    m.elements.push_back(node("p", ElementKind::Process));
    m.elements[0].name = "";
    ThreatTemplate t;
    t.template_id = "x";
    t.applies_to = {ElementKind::Process};
    t.title = "{element} and {element}";
    const auto threats = derive_threats(m, std::vector{t});
    ASSERT_EQ(threats.size(), 1u);
    EXPECT_EQ(threats[0].title, "p and p");
}

TEST(Derivation, BoundaryCrossingPredicate) {
    DfdModel m;
    m.elements = {node("a", ElementKind::Process), node("b", ElementKind::DataStore),
                  node("c", ElementKind::Process), node("tb", ElementKind::TrustBoundary), flow("ab", "a", "b"),
                  flow("bc", "b", "c")};
    m.boundary_membership = {{"a", "tb"}, {"b", "tb"}};
    EXPECT_FALSE(crosses_boundary(m, *m.find("ab")));
    EXPECT_TRUE(crosses_boundary(m, *m.find("bc")));
    ThreatTemplate t;
    t.template_id = "cross";
    t.applies_to = {ElementKind::DataFlow};
    t.requires_boundary_crossing = true;
    const auto threats = derive_threats(m, std::vector{t});
    ASSERT_EQ(threats.size(), 1u);
    EXPECT_EQ(threats[0].element_id, "bc");
}

TEST(Derivation, RejectsInvalidModels) {
    DfdModel dangling;
    dangling.elements = {node("a", ElementKind::Process), flow("f", "a", "nowhere")};
    EXPECT_THROW(derive_threats(dangling, default_stride_templates()), InvalidModelError);

    DfdModel dup;
    dup.elements = {node("a", ElementKind::Process), node("a", ElementKind::DataStore)};
    const auto v = validate_dfd(dup);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].element_id, "a");

    DfdModel loop;
    loop.elements = {node("a", ElementKind::Process), flow("f", "a", "a")};
    EXPECT_FALSE(validate_dfd(loop).empty());

    DfdModel bad_member;
    bad_member.elements = {node("a", ElementKind::Process), node("b", ElementKind::Process)};
    bad_member.boundary_membership = {{"a", "b"}};
    EXPECT_FALSE(validate_dfd(bad_member).empty());

    DfdModel flow_to_flow;
    flow_to_flow.elements = {node("a", ElementKind::Process), node("b", ElementKind::Process), flow("f", "a", "b"),
                             flow("g", "a", "f")};
    EXPECT_FALSE(validate_dfd(flow_to_flow).empty());
}

TEST(Derivation, RejectsBrokenTemplates) {
    ThreatTemplate empty_kinds;
    empty_kinds.template_id = "x";
    EXPECT_THROW(derive_threats(demo_model(), std::vector{empty_kinds}), std::invalid_argument);

    ThreatTemplate crossing;
    crossing.template_id = "y";
    crossing.applies_to = {ElementKind::Process};
    crossing.requires_boundary_crossing = true;
    EXPECT_THROW(check_template(crossing), std::invalid_argument);

    ThreatTemplate ok;
    ok.template_id = "z";
    ok.applies_to = {ElementKind::Process};
    EXPECT_THROW(derive_threats(demo_model(), std::vector{ok, ok}), std::invalid_argument);
}

TEST(DfdXml, RoundTripsRandomModels) {
    for (std::uint64_t i = 0; i < 50; ++i) {
        auto rng = Rng::split(11, i);
        auto model = support::random_dfd(rng);
        if (!model.elements.empty()) model.elements[0].properties = {{"k", "v&<>\""}};
        const auto xml = write_dfd_xml(model);
        EXPECT_EQ(parse_dfd_xml(xml), model) << xml;
    }
}

TEST(DfdXml, ReportsPositionOfMalformedInput) {
    try {
        parse_dfd_xml("<dfd version=\"1\">\n  <element id=\"a\"\n</dfd>");
        FAIL() << "expected XmlParseError";
    } catch (const XmlParseError& e) {
        EXPECT_GE(e.line(), 2);
    }
    EXPECT_THROW(parse_dfd_xml("<graph version=\"1\"/>"), XmlSchemaError);
    EXPECT_THROW(parse_dfd_xml("<dfd version=\"2\"/>"), XmlSchemaError);
}

TEST(TemplatesXml, RoundTripsDefaults) {
    const auto t = default_stride_templates();
    EXPECT_EQ(parse_templates_xml(write_templates_xml(t)), t);
}

TEST(RiskMatrix, ParseAndCanonicalText) {
    const auto m = risk::RiskMatrix::defaults();
    EXPECT_EQ(risk::RiskMatrix::parse(m.to_text()), m);
    const auto custom = risk::RiskMatrix::parse("likelihood.Spoofing = 5\nthreshold = 20\n");
    EXPECT_EQ(custom.likelihood(Category::Spoofing), 5);
    EXPECT_EQ(custom.threshold(), 20);
    EXPECT_THROW(risk::RiskMatrix::parse("likelihood.Spoofing = 6\n"), ConfigError);
    EXPECT_THROW(risk::RiskMatrix::parse("likelihood.Nothing = 2\n"), ConfigError);
    EXPECT_THROW(risk::RiskMatrix::parse("colour = red\n"), ConfigError);
}

TEST(Risk, ScoresAndSelection) {
    const auto model = demo_model();
    const auto threats = derive_threats(model, default_stride_templates());
    auto matrix = risk::RiskMatrix::defaults();
    const auto scored = risk::assess(threats, model, matrix);
    ASSERT_EQ(scored.size(), threats.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        const auto& s = scored[i];
        EXPECT_EQ(s.threat, threats[i]);
        EXPECT_EQ(s.score, s.likelihood * s.impact);
        EXPECT_GE(s.score, 1);
        EXPECT_LE(s.score, 25);
        EXPECT_EQ(s.selected, s.score >= matrix.threshold());
    }
    matrix.set_threshold(25);
    for (const auto& s : risk::assess(threats, model, matrix)) EXPECT_EQ(s.selected, s.score == 25);
    EXPECT_THROW(matrix.set_threshold(26), ConfigError);
}

TEST(Risk, AssessRejectsUnknownElement) {
    Threat t;
    t.threat_id = "x@ghost";
    t.template_id = "x";
    t.element_id = "ghost";
    EXPECT_THROW(risk::assess(std::vector{t}, demo_model(), risk::RiskMatrix::defaults()), std::invalid_argument);
}

TEST(Risk, WeightsUseReferencesThenCategoryFallback) {
    const auto templates = default_stride_templates();
    risk::ScoredThreat dos;
    dos.threat = {"stride.denial_of_service@b", "stride.denial_of_service", "b", Category::DenialOfService, ""};
    dos.score = 20;
    dos.selected = true;
    risk::ScoredThreat info;
    info.threat = {"stride.information_disclosure@b", "stride.information_disclosure", "b",
                   Category::InformationDisclosure, ""};
    info.score = 25;
    info.selected = true;
    risk::ScoredThreat unselected = dos;
    unselected.threat.threat_id = "stride.denial_of_service@c";
    unselected.score = 25;
    unselected.selected = false;

    const risk::CategoryAttackIndex fallback{{Category::InformationDisclosure, {"sniff"}}};
    const auto w = risk::prioritized_weights(std::vector{dos, info, unselected}, templates, fallback);
    EXPECT_DOUBLE_EQ(w.at("flood_publish"), 0.8);
    EXPECT_DOUBLE_EQ(w.at("flood_connect"), 0.8);
    EXPECT_DOUBLE_EQ(w.at("sniff"), 1.0);
    EXPECT_EQ(w.count("client_id_spoof"), 0u);
}

TEST(ThreatXml, ImportExportIdentity) {
    for (std::uint64_t i = 0; i < 100; ++i) {
        auto rng = Rng::split(99, i);
        const auto threats = support::random_scored_threats(rng);
        const std::map<std::string, std::string> prov{{"dfd-digest", sha256_hex(std::string_view("x"))}};
        const auto xml = export_threats(threats, prov);
        EXPECT_EQ(export_threats(threats, prov), xml);
        const auto doc = import_threat_document(xml);
        EXPECT_EQ(doc.threats, threats);
        EXPECT_EQ(doc.provenance, prov);
        EXPECT_EQ(export_threats(doc.threats, doc.provenance), xml);
    }
}

TEST(ThreatXml, RejectsInconsistentDocuments) {
    const std::string head = "<?xml version=\"1.0\"?>\n<threats version=\"1\">\n";
    EXPECT_THROW(import_threats(head +
                                "<threat id=\"a@b\" template=\"a\" element=\"b\" category=\"Spoofing\" "
                                "likelihood=\"2\" impact=\"2\" score=\"5\" selected=\"true\" title=\"\"/></threats>"),
                 XmlSchemaError);
    EXPECT_THROW(import_threats(head +
                                "<threat id=\"x@y\" template=\"a\" element=\"b\" category=\"Spoofing\" "
                                "likelihood=\"2\" impact=\"2\" score=\"4\" selected=\"true\" title=\"\"/></threats>"),
                 XmlSchemaError);
    EXPECT_THROW(import_threats(head + "<threat"), XmlParseError);
    std::vector<risk::ScoredThreat> unsorted(2);
    unsorted[0].threat = {"b@x", "b", "x", Category::Spoofing, ""};
    unsorted[1].threat = {"a@x", "a", "x", Category::Spoofing, ""};
    EXPECT_THROW(export_threats(unsorted), std::invalid_argument);
}
