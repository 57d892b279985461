#pragma once

#include <vector>

#include "s2c/types.hpp"

namespace s2c::losses {

// Batch of latent maps with homogeneous shapes.
using LatentBatch = std::vector<LatentMap>;

// Spatial mean of per-patch cosine similarity; the eps guard keeps
// zero-vector patches finite.
double patch_cosine(const LatentMap& a, const LatentMap& b);

// Accumulates coeff * d(patch_cosine(a,b))/d(a or b) into ga/gb.
// Either gradient pointer may be null.
void patch_cosine_backward(const LatentMap& a, const LatentMap& b,
                           double coeff, LatentMap* ga, LatentMap* gb);

// Bidirectional triplet over patch cosine: each temporal image anchors
// against its augmented copy (positive) and the other phase (negative).
double triplet_loss(const LatentMap& y1, const LatentMap& bar_y1,
                    const LatentMap& y2, const LatentMap& bar_y2,
                    const TripletConfig& cfg);
double triplet_loss_backward(const LatentMap& y1, const LatentMap& bar_y1,
                             const LatentMap& y2, const LatentMap& bar_y2,
                             const TripletConfig& cfg, LatentMap* g_y1,
                             LatentMap* g_bar_y1, LatentMap* g_y2,
                             LatentMap* g_bar_y2);

// Batch infoNCE over the two cross-phase similarity matrices
// S1[u][v] = Y1^u . barY2^v and S2[u][v] = Y2^u . barY1^v.
double info_nce(const LatentBatch& y1, const LatentBatch& y2,
                const LatentBatch& bar_y1, const LatentBatch& bar_y2);
double info_nce_backward(const LatentBatch& y1, const LatentBatch& y2,
                         const LatentBatch& bar_y1, const LatentBatch& bar_y2,
                         std::vector<LatentMap>* g_y1,
                         std::vector<LatentMap>* g_y2,
                         std::vector<LatentMap>* g_bar_y1,
                         std::vector<LatentMap>* g_bar_y2);

// Generic symmetric infoNCE over a precomputed pairing; shared by the
// homogeneous and multimodal variants. Returns loss and (optionally)
// d(loss)/dS1, d(loss)/dS2 for the two N x N similarity matrices.
double info_nce_from_matrices(const std::vector<std::vector<double>>& s1,
                              const std::vector<std::vector<double>>& s2,
                              std::vector<std::vector<double>>* d_s1,
                              std::vector<std::vector<double>>* d_s2);

// Mean density of the floor(G*(1-T)) lowest-density full d x d grids.
double grid_sparsity(const ChangeProbMap& yc, const SparsityConfig& cfg);
// d(grid_sparsity)/d(yc) accumulated into g (same h x w layout, double).
double grid_sparsity_backward(const ChangeProbMap& yc,
                              const SparsityConfig& cfg,
                              std::vector<double>* g);

// L = tri + alpha*info + beta*spa.
double total_loss(double tri, double info, double spa, const LossWeights& w);

}  // namespace s2c::losses
