#include "cfvae/graph.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace cfvae {

Matrix ConceptGraph::adjacency() const {
    Matrix C = Matrix::Zero(n, n);
    for (const auto &e : edges) {
        if (e.parent < 0 || e.parent >= n || e.child < 0 || e.child >= n)
            throw GraphError("edge endpoint out of range: " + std::to_string(e.parent) + "->" +
                             std::to_string(e.child));
        if (e.parent == e.child)
            throw GraphError("self-loop on concept " + std::to_string(e.parent));
        if (!std::isfinite(e.weight))
            throw GraphError("non-finite edge weight on " + std::to_string(e.parent) + "->" +
                             std::to_string(e.child));
        C(e.parent, e.child) = e.weight;
    }
    return C;
}

int ConceptGraph::index_of(const std::string &label) const {
    for (int i = 0; i < static_cast<int>(labels.size()); ++i)
        if (labels[i] == label) return i;
    return -1;
}

ConceptGraph ConceptGraph::from_adjacency(const Matrix &C) {
    ConceptGraph g;
    g.n = static_cast<int>(C.rows());
    for (int i = 0; i < g.n; ++i) {
        g.labels.push_back("z" + std::to_string(i));
        for (int j = 0; j < g.n; ++j)
            if (C(i, j) != 0.0) g.edges.push_back({i, j, C(i, j)});
    }
    return g;
}

namespace {

// DFS coloring; fills `order` in reverse-post order and reports one cycle.
bool dfs_visit(const Matrix &C, int u, std::vector<int> &color, std::vector<int> &parent,
               std::vector<int> &order, std::string &cycle) {
    const int n = static_cast<int>(C.rows());
    color[u] = 1;
    for (int v = 0; v < n; ++v) {
        if (C(u, v) == 0.0) continue;
        if (color[v] == 1) {
            std::ostringstream os;
            std::vector<int> path{v};
            for (int w = u; w != v; w = parent[w]) path.push_back(w);
            os << "cycle:";
            for (auto it = path.rbegin(); it != path.rend(); ++it) os << " " << *it << " ->";
            os << " " << v;
            cycle = os.str();
            return false;
        }
        if (color[v] == 0) {
            parent[v] = u;
            if (!dfs_visit(C, v, color, parent, order, cycle)) return false;
        }
    }
    color[u] = 2;
    order.push_back(u);
    return true;
}

std::vector<int> topo_or_throw(const Matrix &C) {
    if (C.rows() != C.cols()) throw GraphError("adjacency matrix must be square");
    const int n = static_cast<int>(C.rows());
    for (int i = 0; i < n; ++i)
        if (C(i, i) != 0.0) throw GraphError("self-loop on concept " + std::to_string(i));
    std::vector<int> color(n, 0), parent(n, -1), order;
    std::string cycle;
    for (int u = 0; u < n; ++u)
        if (color[u] == 0 && !dfs_visit(C, u, color, parent, order, cycle))
            throw GraphError("graph is not acyclic; " + cycle);
    std::reverse(order.begin(), order.end());
    return order;
}

} // namespace

void validate_dag(const Matrix &C) { (void)topo_or_throw(C); }

std::vector<int> topological_order(const Matrix &C) { return topo_or_throw(C); }

Matrix structure_transform(const Matrix &z, const Matrix &C, TransformMode mode) {
    const Index n = C.rows();
    if (z.cols() != n)
        throw NumericError("structure_transform: batch width " + std::to_string(z.cols()) +
                           " does not match " + std::to_string(n) + " concepts");
    if (mode == TransformMode::OneStep) {
        return z + z * C; // row convention: z' = z (I + C^T)^T per sample
    }
    const auto order = topological_order(C);
    Matrix zp = z;
    // z'_k = z_k + sum_{p -> k} C(p,k) z'_p; parents precede k in `order`.
    for (int k : order)
        for (Index p = 0; p < n; ++p)
            if (C(p, k) != 0.0) zp.col(k) += C(p, k) * zp.col(p);
    return zp;
}

Matrix structure_transform_backward(const Matrix &grad_out, const Matrix &C, TransformMode mode) {
    const Index n = C.rows();
    if (grad_out.cols() != n)
        throw NumericError("structure_transform_backward: width mismatch");
    if (mode == TransformMode::OneStep) {
        return grad_out + grad_out * C.transpose();
    }
    const auto order = topological_order(C);
    Matrix g = grad_out;
    // x_k = g_k + sum_{k -> c} C(k,c) x_c; children follow k in `order`.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int k = *it;
        for (Index c = 0; c < n; ++c)
            if (C(k, c) != 0.0) g.col(k) += C(k, c) * g.col(c);
    }
    return g;
}

Matrix structure_transform_lambda_jacobian(const Vector &z, const Matrix &C,
                                           const std::vector<ConceptEdge> &edges,
                                           TransformMode mode) {
    const Index n = C.rows();
    if (z.size() != n) throw NumericError("lambda jacobian: vector length mismatch");
    Matrix J = Matrix::Zero(n, static_cast<Index>(edges.size()));
    if (mode == TransformMode::OneStep) {
        for (std::size_t e = 0; e < edges.size(); ++e)
            J(edges[e].child, static_cast<Index>(e)) = z(edges[e].parent);
        return J;
    }
    const Matrix zp = structure_transform(z.transpose(), C, mode);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        // d z'/d lambda_{p->q} = z'_p * (I - C^T)^{-1} e_q
        Matrix unit = Matrix::Zero(1, n);
        unit(0, edges[e].child) = 1.0;
        const Matrix col = structure_transform(unit, C, mode);
        J.col(static_cast<Index>(e)) = zp(0, edges[e].parent) * col.transpose();
    }
    return J;
}

bool is_non_descendant(const AnnotatedGraph &g, int node) {
    const int n = g.graph.n;
    if (node < 0 || node >= n)
        throw GraphError("unknown node index " + std::to_string(node));
    std::vector<char> reach(n, 0);
    std::vector<int> stack;
    for (int s : g.sensitive) {
        if (s < 0 || s >= n) throw GraphError("sensitive node index out of range");
        if (!reach[s]) {
            reach[s] = 1; // A itself is never a fair input
            stack.push_back(s);
        }
    }
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (const auto &e : g.graph.edges) {
            if (e.parent == u && !reach[e.child]) {
                reach[e.child] = 1;
                stack.push_back(e.child);
            }
        }
    }
    return !reach[node];
}

bool is_non_descendant(const AnnotatedGraph &g, const std::string &label) {
    const int idx = g.graph.index_of(label);
    if (idx < 0) throw GraphError("unknown node label '" + label + "'");
    return is_non_descendant(g, idx);
}

ConceptGraph load_concept_graph(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw GraphError("cannot open graph file: " + path);
    ConceptGraph g;
    bool have_n = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream is(line);
        std::string kw;
        if (!(is >> kw)) continue;
        if (kw == "n") {
            if (!(is >> g.n) || g.n <= 0)
                throw GraphError(path + ":" + std::to_string(lineno) + ": bad concept count");
            g.labels.resize(g.n);
            for (int i = 0; i < g.n; ++i) g.labels[i] = "z" + std::to_string(i);
            have_n = true;
        } else if (kw == "label") {
            int i = 0;
            std::string name;
            if (!have_n || !(is >> i >> name) || i < 0 || i >= g.n)
                throw GraphError(path + ":" + std::to_string(lineno) + ": bad label line");
            g.labels[i] = name;
        } else if (kw == "edge") {
            ConceptEdge e;
            if (!have_n || !(is >> e.parent >> e.child >> e.weight))
                throw GraphError(path + ":" + std::to_string(lineno) + ": bad edge line");
            g.edges.push_back(e);
        } else {
            throw GraphError(path + ":" + std::to_string(lineno) + ": unknown keyword '" + kw +
                             "'");
        }
    }
    if (!have_n) throw GraphError(path + ": missing 'n <count>' line");
    validate_dag(g.adjacency());
    return g;
}

void save_concept_graph(const ConceptGraph &g, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write graph file: " + path);
    out << "n " << g.n << "\n";
    for (int i = 0; i < g.n; ++i) out << "label " << i << " " << g.labels[i] << "\n";
    for (const auto &e : g.edges)
        out << "edge " << e.parent << " " << e.child << " " << e.weight << "\n";
}

} // namespace cfvae
