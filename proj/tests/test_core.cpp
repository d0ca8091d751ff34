#include <catch2/catch_amalgamated.hpp>

#include "hirec/core.hpp"

using namespace hirec;

TEST_CASE("validate_query accepts well-formed queries") {
    PatientQuery query{"chest pain", 54, Sex::M, {}, {}};
    REQUIRE(validate_query(query).ok());

    query.age = 0;
    REQUIRE(validate_query(query).ok());
    query.age = 150;
    REQUIRE(validate_query(query).ok());
    query.age.reset();
    REQUIRE(validate_query(query).ok());
}

TEST_CASE("validate_query rejects invariant violations") {
    PatientQuery empty{"", {}, {}, {}, {}};
    auto result = validate_query(empty);
    REQUIRE_FALSE(result.ok());
    CHECK(result.error().code == ErrorCode::EMPTY_SYMPTOMS);

    PatientQuery blank{"   \t ", {}, {}, {}, {}};
    CHECK(validate_query(blank).error().code == ErrorCode::EMPTY_SYMPTOMS);

    PatientQuery old_age{"fatigue", 200, {}, {}, {}};
    CHECK(validate_query(old_age).error().code == ErrorCode::AGE_OUT_OF_RANGE);

    PatientQuery negative{"fatigue", -3, {}, {}, {}};
    CHECK(validate_query(negative).error().code == ErrorCode::AGE_OUT_OF_RANGE);
}

TEST_CASE("urgency ordering is total: ROUTINE < PRIORITY < URGENT") {
    const UrgencyLevel levels[] = {UrgencyLevel::ROUTINE, UrgencyLevel::PRIORITY,
                                   UrgencyLevel::URGENT};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK((levels[i] < levels[j]) == (i < j));
            CHECK((levels[i] == levels[j]) == (i == j));
            CHECK((levels[i] > levels[j]) == (i > j));
        }
    }
}

TEST_CASE("document ids reject empty and whitespace-only values") {
    CHECK(DocumentId::create("d1").ok());
    CHECK_FALSE(DocumentId::create("").ok());
    CHECK_FALSE(DocumentId::create("   ").ok());
    CHECK_FALSE(DocumentId::create("\t\n").ok());
}

TEST_CASE("document construction enforces every invariant or fails") {
    auto id = [](const char* text) { return DocumentId::create(text).value(); };

    SECTION("valid department document") {
        auto doc = Document::create(id("d1"), Tier::DEPARTMENT, "Cardiology", "title", "body");
        REQUIRE(doc.ok());
        CHECK(doc.value().department() == "cardiology");  // canonicalized
    }
    SECTION("empty body fails") {
        auto doc = Document::create(id("d1"), Tier::DEPARTMENT, "cardiology", "title", "");
        REQUIRE_FALSE(doc.ok());
        CHECK(doc.error().code == ErrorCode::INVALID_DOCUMENT);
    }
    SECTION("empty department fails") {
        auto doc = Document::create(id("d1"), Tier::DEPARTMENT, "  ", "title", "body");
        REQUIRE_FALSE(doc.ok());
    }
    SECTION("item without test_id fails") {
        auto doc = Document::create(id("i1"), Tier::ITEM, "cardiology", "ecg", "body");
        REQUIRE_FALSE(doc.ok());
        CHECK(doc.error().code == ErrorCode::MISSING_FIELD);
    }
    SECTION("item with test_id succeeds") {
        auto doc = Document::create(id("i1"), Tier::ITEM, "cardiology", "ecg", "body",
                                    {{"test_id", "ecg_12_lead"}});
        REQUIRE(doc.ok());
        CHECK(doc.value().test_id() == "ecg_12_lead");
    }
    SECTION("urgency tag defaults to routine") {
        auto doc = Document::create(id("i1"), Tier::ITEM, "cardiology", "ecg", "body",
                                    {{"test_id", "t"}, {"urgency", "urgent"}});
        CHECK(doc.value().urgency_tag() == UrgencyLevel::URGENT);
        auto plain = Document::create(id("i2"), Tier::ITEM, "cardiology", "ecg", "body",
                                      {{"test_id", "t"}});
        CHECK(plain.value().urgency_tag() == UrgencyLevel::ROUTINE);
    }
}

TEST_CASE("department canonicalization") {
    CHECK(canonicalize_department("cardiology") == "cardiology");
    CHECK(canonicalize_department("CARDIOLOGY") == "cardiology");
    CHECK(canonicalize_department("Internal Medicine") == "internal_medicine");
    CHECK(canonicalize_department("gastro-enterology") == "gastro_enterology");
    CHECK(canonicalize_department("  padded  name  ") == "padded_name");
    CHECK(canonicalize_department("--") == "");
    CHECK(canonicalize_department("") == "");
}

TEST_CASE("pipeline params validation") {
    PipelineParams params;
    CHECK(params.validate().ok());

    params.root_top_k = 0;
    CHECK_FALSE(params.validate().ok());
    params.root_top_k = 10;

    params.min_weight = 1.5;
    CHECK_FALSE(params.validate().ok());
    params.min_weight = -0.1;
    CHECK_FALSE(params.validate().ok());
    params.min_weight = 1.0;
    CHECK(params.validate().ok());
}
