// Retrieval-to-encoding walkthrough on a small in-memory graph: ground a
// query, pull a bounded subgraph, linearize it, build the Levi form, and run
// the frozen structure encoder over it.

#include <iostream>

#include <kglm/kglm.hpp>

int main() {
    using namespace kglm;

    KnowledgeGraph g;
    auto add = [&](const char* h, const char* r, const char* t, double w) {
        g.add_triple(g.add_entity(h), r, g.add_entity(t), w);
    };
    add("bird", "CapableOf", "fly", 2.0);
    add("bird", "IsA", "animal", 1.0);
    add("animal", "CapableOf", "move", 1.0);
    add("fish", "CapableOf", "swim", 2.0);
    add("fish", "IsA", "animal", 1.5);

    DocFreq df = build_doc_freq({"what can a bird do", "where do fish swim"});

    Query q = filter_stopwords(tokenize("What can a bird do?"));
    std::cout << "query tokens:";
    for (const auto& t : q.tokens) std::cout << ' ' << t;
    std::cout << '\n';

    TopicSet topics = get_topics(q, g, df, 4);
    std::cout << "topics:";
    for (const auto& [id, score] : topics.topics)
        std::cout << ' ' << g.entity(id).label << '(' << score << ')';
    std::cout << '\n';

    SubGraph sg = get_kg(topics, g, 2, 16);
    std::cout << "subgraph: " << sg.graph.entities().size() << " entities, "
              << sg.graph.triples().size() << " triples\n";

    TraversalSequence seq = serialize(sg, TraversalStrategy::Dfs, 7);
    std::cout << "dfs: " << seq.text() << '\n';

    LeviGraph levi = to_levi(sg, seq);
    PositionMatrix pos = position_matrix(levi, 8);
    std::cout << "levi: " << levi.nodes.size() << " nodes, " << levi.edges.size()
              << " edges\n";

    EncoderParams enc = init_encoder(42, 32, 2, 8, kg_vocab_labels(sg.graph));
    Tensor kg_e = encode(serialize_levi(levi), pos, enc);
    std::cout << "encoded: " << kg_e.rows << " x " << kg_e.cols << '\n';
    return 0;
}
