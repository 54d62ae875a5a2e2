#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "elu/corpus.hpp"
#include "elu/text.hpp"

using namespace elu;
using corpus::Role;

TEST_CASE("generate_world shape and invariants") {
    const auto c = corpus::generate_world(1, 2, 5, 10, 10);
    REQUIRE(c.entities.size() == 2);
    for (const auto& ep : c.entities) {
        REQUIRE(ep.facts.size() == 5);
        std::set<std::string> qs;
        for (const auto& f : ep.facts) {
            REQUIRE(text::contains_name(f.question, ep.name));
            REQUIRE(!f.answer.empty());
            REQUIRE(f.answer.find('\n') == std::string::npos);
            REQUIRE(f.answer.find(f.core_value) != std::string::npos);
            qs.insert(text::normalize(f.question));
        }
        REQUIRE(qs.size() == 5);  // pairwise distinct after normalization
    }
    REQUIRE(c.retain_facts.size() == 10);
    REQUIRE(c.world_facts.size() == 10);
}

TEST_CASE("generate_world is a pure function of its arguments") {
    const auto a = corpus::corpus_to_json(corpus::generate_world(1, 3, 6, 8, 8)).dump();
    const auto b = corpus::corpus_to_json(corpus::generate_world(1, 3, 6, 8, 8)).dump();
    REQUIRE(a == b);
    const auto other = corpus::corpus_to_json(corpus::generate_world(2, 3, 6, 8, 8)).dump();
    REQUIRE(a != other);
}

TEST_CASE("generate_world at TOFU scale") {
    const auto c = corpus::generate_world(1, 200, 20, 40, 40);
    REQUIRE(c.entities.size() == 200);
    std::set<std::string> names;
    for (const auto& ep : c.entities) {
        REQUIRE(ep.facts.size() == 20);
        names.insert(ep.name);
    }
    REQUIRE(names.size() == 200);
}

TEST_CASE("generate_world validates counts and capacity") {
    REQUIRE_THROWS_AS(corpus::generate_world(1, 0, 5, 5, 5), std::invalid_argument);
    REQUIRE_THROWS_AS(corpus::generate_world(1, 1, 4, 5, 5), std::invalid_argument);
    REQUIRE_THROWS_AS(corpus::generate_world(1, 1, 99, 5, 5), CapacityError);
    REQUIRE_THROWS_AS(corpus::generate_world(1, 600, 5, 5, 5), CapacityError);
    REQUIRE_THROWS_AS(corpus::generate_world(1, 1, 5, 5000, 5), CapacityError);
    try {
        corpus::generate_world(1, 1, 5, 5000, 5);
    } catch (const CapacityError& e) {
        REQUIRE(e.pool() == "retain fact pairs");
    }
}

TEST_CASE("entity names never appear in retain or world questions") {
    const auto c = corpus::generate_world(3, 8, 12, 30, 30);
    for (const auto& ep : c.entities) {
        for (const auto& bank : {c.retain_facts, c.world_facts})
            for (const auto& item : bank) REQUIRE_FALSE(text::contains_name(item.question, ep.name));
    }
}

TEST_CASE("build_eval_item materializes paraphrase and five distinct perturbations") {
    const auto c = corpus::generate_world(5, 3, 8, 10, 10);
    int checked = 0;
    for (std::size_t e = 0; e < c.entities.size(); ++e) {
        const auto items = corpus::entity_eval_items(c, e);
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& item = items[i];
            const auto& fact = c.entities[e].facts[i];
            // paraphrase keeps the core value
            REQUIRE(item.paraphrase.find(fact.core_value) != std::string::npos);
            std::set<std::string> all{item.answer, item.paraphrase};
            for (const auto& p : item.perturbations) {
                REQUIRE(p.find(fact.core_value) == std::string::npos);
                all.insert(p);
            }
            REQUIRE(all.size() == 7);  // answer, paraphrase, 5 distinct perturbations
            ++checked;
        }
    }
    REQUIRE(checked == 24);
}

TEST_CASE("build_eval_item is deterministic and rejects untagged facts") {
    corpus::TaggedFact f{"Where was Elara Vancross born?", "Elara Vancross was born in Avaria.",
                         "Avaria"};
    const auto a = corpus::build_eval_item(f, 9);
    const auto b = corpus::build_eval_item(f, 9);
    REQUIRE(corpus::eval_item_to_json(a).dump() == corpus::eval_item_to_json(b).dump());
    REQUIRE_THROWS_AS(corpus::build_eval_item({"Who?", "Nobody.", "x"}, 1), std::invalid_argument);
}

TEST_CASE("perturbations are pairwise distinct across random items") {
    const auto c = corpus::generate_world(11, 5, 20, 10, 10);
    int items_checked = 0;
    for (std::size_t e = 0; e < c.entities.size() && items_checked < 100; ++e)
        for (const auto& item : corpus::entity_eval_items(c, e)) {
            std::set<std::string> s(item.perturbations.begin(), item.perturbations.end());
            REQUIRE(s.size() == 5);
            REQUIRE_FALSE(s.count(item.answer));
            REQUIRE_FALSE(s.count(item.paraphrase));
            if (++items_checked >= 100) break;
        }
    REQUIRE(items_checked == 100);
}

TEST_CASE("split_sets partitions the corpus") {
    const auto c = corpus::generate_world(7, 2, 6, 12, 12);
    const auto sets = corpus::split_sets(c, "e1");
    REQUIRE(sets.at(Role::target).eval_items.size() == 6);
    REQUIRE(sets.at(Role::target).source_entity == "e1");
    REQUIRE(sets.at(Role::other_entities).eval_items.size() == 6);
    // other_entities holds exactly e0's facts
    for (std::size_t i = 0; i < 6; ++i)
        REQUIRE(sets.at(Role::other_entities).eval_items[i].question ==
                c.entities[0].facts[i].question);
    REQUIRE(sets.at(Role::retain).eval_items.size() == 12);
    REQUIRE(sets.at(Role::world_facts).eval_items.size() == 6);
    REQUIRE(sets.at(Role::real_authors_analog).eval_items.size() == 6);

    // union of questions = all corpus questions, pairwise disjoint
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& [role, ks] : sets) {
        for (const auto& item : ks.eval_items) {
            REQUIRE(seen.insert(text::normalize(item.question)).second);
            ++total;
        }
    }
    std::set<std::string> expected;
    for (const auto& ep : c.entities)
        for (const auto& f : ep.facts) expected.insert(text::normalize(f.question));
    for (const auto& bank : {c.retain_facts, c.world_facts})
        for (const auto& item : bank) expected.insert(text::normalize(item.question));
    REQUIRE(seen == expected);
    REQUIRE(total == expected.size());

    REQUIRE_THROWS_AS(corpus::split_sets(c, "nope"), std::invalid_argument);
}

TEST_CASE("corpus JSON round trip preserves byte-identical serialization") {
    const auto c = corpus::generate_world(13, 3, 7, 9, 9);
    const auto j = corpus::corpus_to_json(c);
    const auto c2 = corpus::corpus_from_json(j);
    REQUIRE(corpus::corpus_to_json(c2).dump() == j.dump());
    // field order per the interface
    const std::string dumped = j.dump();
    REQUIRE(dumped.find("\"seed\"") < dumped.find("\"entities\""));
    REQUIRE(dumped.find("\"entities\"") < dumped.find("\"retain\""));
    REQUIRE(dumped.find("\"retain\"") < dumped.find("\"world_facts\""));
}

TEST_CASE("demo names are disjoint from entity names") {
    const auto c = corpus::generate_world(17, 16, 5, 5, 5);
    const auto demos = corpus::demo_names(8);
    std::set<std::string> entity_tokens;
    for (const auto& ep : c.entities)
        for (const auto& w : text::normalized_words(ep.name)) entity_tokens.insert(w);
    for (const auto& d : demos)
        for (const auto& w : text::normalized_words(d)) REQUIRE_FALSE(entity_tokens.count(w));
}
