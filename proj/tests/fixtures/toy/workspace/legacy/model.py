import tensorflow as tf
from legacy import layers, metrics, features


class Classifier(tf.keras.Model):
    def __init__(self, hidden=64, classes=10):
        super().__init__()
        self.hidden = layers.Dense(hidden)
        self.out = tf.keras.layers.Dense(classes)

    def call(self, batch):
        return self.out(self.hidden(features.preprocess(batch)))


def evaluate(model, batch, labels):
    logits = model(batch)
    return {"accuracy": metrics.accuracy(logits, labels), "loss": metrics.cross_entropy(logits, labels)}
