"""Mining Likert-scale travel-intention surveys.

Respondents are clustered on their 15 item responses (Euclidean K-means or
an edit-distance/Euclidean composite with medoids), the cluster count is
chosen by mean silhouette, and a random forest ranks the coded social and
travel attributes by permutation importance.
"""

__version__ = "0.1.0"
