#ifndef CFVAE_GRAPH_HPP_
#define CFVAE_GRAPH_HPP_

#include "cfvae/types.hpp"

#include <string>
#include <vector>

namespace cfvae {

// How the causal constraint turns pre-transform latents into structured ones.
//   Exact:   z' = (I - C^T)^{-1} z, solved by substitution in topological order.
//   OneStep: z' = (I + C^T) z, the first-order truncation.
enum class TransformMode { Exact, OneStep };

struct ConceptEdge {
    int parent = 0;
    int child = 0;
    double weight = 0.0;
};

// DAG over latent concepts. Edge weights are fixed domain knowledge, not
// learned parameters.
struct ConceptGraph {
    int n = 0;
    std::vector<ConceptEdge> edges;
    std::vector<std::string> labels; // size n; defaults to z0..z{n-1}

    Matrix adjacency() const; // C(i,j) = weight of edge i->j, 0 otherwise
    int index_of(const std::string &label) const; // -1 when unknown
    static ConceptGraph from_adjacency(const Matrix &C);
};

// Throws GraphError naming one cycle when the nonzero pattern of C is cyclic.
void validate_dag(const Matrix &C);

// Topological order of the DAG induced by C. Throws GraphError on cycles.
std::vector<int> topological_order(const Matrix &C);

// Applies the structured transform to a batch of row vectors (B x n).
// Exact mode never forms the inverse; it solves the triangular system that
// the topological order exposes.
Matrix structure_transform(const Matrix &z, const Matrix &C,
                           TransformMode mode = TransformMode::Exact);

// Pulls a gradient w.r.t. the transform output back to the input:
// given dL/dz' returns dL/dz. Same batch layout as structure_transform.
Matrix structure_transform_backward(const Matrix &grad_out, const Matrix &C,
                                    TransformMode mode = TransformMode::Exact);

// d z' / d lambda_e for one input vector z, one column per edge of `edges`.
// Row k gives the sensitivity of z'_k to that edge weight.
Matrix structure_transform_lambda_jacobian(const Vector &z, const Matrix &C,
                                           const std::vector<ConceptEdge> &edges,
                                           TransformMode mode = TransformMode::Exact);

// Concept graph with fairness annotations: which nodes carry sensitive
// attributes and which is the prediction target.
struct AnnotatedGraph {
    ConceptGraph graph;
    std::vector<int> sensitive; // node indices of A
    int target = -1;            // node index of Y, -1 when absent
};

// True iff no directed path from any sensitive node reaches `node`.
// A sensitive node itself is never a fair input, so it reports false.
bool is_non_descendant(const AnnotatedGraph &g, int node);
bool is_non_descendant(const AnnotatedGraph &g, const std::string &label);

// Text interchange: "n <count>", optional "label <i> <name>" lines, and one
// "edge <parent> <child> <weight>" line per edge. '#' starts a comment.
ConceptGraph load_concept_graph(const std::string &path);
void save_concept_graph(const ConceptGraph &g, const std::string &path);

} // namespace cfvae

#endif
